use std::f64::consts::PI;
use std::sync::Arc;

use wcurvlab_core::convergence::Ladder;
use wcurvlab_core::fixtures::{sample_sym2, RandomSpec, TrigFactory};
use wcurvlab_core::grid::*;

fn torus(n: usize, dim: usize) -> Arc<Chart> {
    Chart::torus(&vec![n; dim], &vec![2.0 * PI; dim])
        .unwrap()
        .into_shared()
}

fn sup_error(f: &ScalarField, oracle: impl Fn(&[f64]) -> f64) -> f64 {
    let c = f.chart();
    c.valid_nodes(f.margin())
        .into_iter()
        .map(|k| (f.at(k) - oracle(&c.coords(k))).abs())
        .fold(0.0, f64::max)
}

#[test]
fn partial_of_sine_on_circle() {
    let c = torus(64, 1);
    let f = ScalarField::from_fn(&c, |x| x[0].sin());
    let d = partial(&f, 0).unwrap();
    assert!(sup_error(&d, |x| x[0].cos()) <= 1e-5);
}

#[test]
fn partial_of_constant_is_exactly_zero() {
    let c = torus(16, 2);
    let f = ScalarField::constant(&c, 3.25);
    assert_eq!(partial(&f, 1).unwrap().sup(), 0.0);
}

#[test]
fn partial_is_exact_on_cubics() {
    let c = Chart::open_box(&[0.0], &[64], &[1.0])
        .unwrap()
        .into_shared();
    let f = ScalarField::from_fn(&c, |x| x[0].powi(3));
    let d = partial(&f, 0).unwrap();
    assert_eq!(d.margin(), 2);
    assert!(sup_error(&d, |x| 3.0 * x[0] * x[0]) < 1e-11);
}

#[test]
fn partial_rejects_bad_axis_and_exhausted_margin() {
    let c = Chart::open_box(&[0.0], &[8], &[1.0]).unwrap().into_shared();
    let f = ScalarField::from_fn(&c, |x| x[0]);
    assert!(matches!(
        partial(&f, 1),
        Err(GridError::AxisOutOfRange { .. })
    ));
    let d = partial(&f, 0).unwrap();
    assert!(matches!(
        partial(&d, 0),
        Err(GridError::MarginExhausted { .. })
    ));
}

#[test]
fn flat_christoffels_vanish() {
    let c = torus(8, 3);
    let g = Sym2Field::euclidean(&c);
    let gam = christoffel(&g).unwrap();
    assert_eq!(gam.max_error(|_, _, _, _| 0.0), 0.0);
}

fn polar_box(n: usize) -> Arc<Chart> {
    Chart::open_box(&[1.0, 0.0], &[n, n], &[1.0, 1.0])
        .unwrap()
        .into_shared()
}

#[test]
fn polar_christoffels() {
    let c = polar_box(64);
    let g = Sym2Field::from_fn(&c, |x, i, j| match (i, j) {
        (0, 0) => 1.0,
        (1, 1) => x[0] * x[0],
        _ => 0.0,
    });
    let gam = christoffel(&g).unwrap();
    let err = gam.max_error(|x, k, i, j| match (k, i, j) {
        (0, 1, 1) => -x[0],
        (1, 0, 1) | (1, 1, 0) => 1.0 / x[0],
        _ => 0.0,
    });
    assert!(err <= 1e-6, "{err}");
}

#[test]
fn conformal_christoffels() {
    let c = torus(64, 2);
    let u = |x: &[f64]| 0.1 * x[0].sin();
    let du = |x: &[f64]| [0.1 * x[0].cos(), 0.0];
    let g = Sym2Field::from_fn(&c, |x, i, j| if i == j { (2.0 * u(x)).exp() } else { 0.0 });
    let gam = christoffel(&g).unwrap();
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let err = gam.max_error(|x, k, i, j| {
        let g = du(x);
        d(k, i) * g[j] + d(k, j) * g[i] - d(i, j) * g[k]
    });
    assert!(err < 1e-6, "{err}");
}

#[test]
fn round_sphere_has_scalar_curvature_two() {
    let c = Chart::open_box(&[0.5, 0.0], &[64, 16], &[2.1, 1.0])
        .unwrap()
        .into_shared();
    let g = Sym2Field::from_fn(&c, |x, i, j| match (i, j) {
        (0, 0) => 1.0,
        (1, 1) => x[0].sin().powi(2),
        _ => 0.0,
    });
    let curv = curvature(&g).unwrap();
    assert!(sup_error(&curv.r, |_| 2.0) <= 1e-5);
    // R_0101 = sin²θ pins the sign convention (sectional curvature +1)
    let k = c.valid_nodes(curv.rm.margin())[40];
    let th = c.coords(k)[0];
    assert!((curv.rm.at(k, 0, 1, 0, 1) - th.sin().powi(2)).abs() < 1e-5);
    assert!((curv.rc.at(k, 0, 0) - 1.0).abs() < 1e-5);
}

#[test]
fn conformal_torus_curvature_matches_gauss_formula() {
    let c = torus(64, 2);
    let u = |x: &[f64]| 0.1 * x[0].sin();
    let g = Sym2Field::from_fn(&c, |x, i, j| if i == j { (2.0 * u(x)).exp() } else { 0.0 });
    let curv = curvature(&g).unwrap();
    // R = -2 e^{-2u} Δ_flat u
    let err = sup_error(&curv.r, |x| {
        -2.0 * (-2.0 * u(x)).exp() * (-0.1 * x[0].sin())
    });
    assert!(err < 1e-6, "{err}");
}

#[test]
fn flat_curvature_vanishes() {
    let c = torus(8, 3);
    let curv = curvature(&Sym2Field::euclidean(&c)).unwrap();
    assert_eq!(curv.rm.sup() + curv.rc.sup() + curv.r.sup(), 0.0);
}

#[test]
fn hessian_and_weighted_laplacian_examples() {
    // Δ_φ e^{x} = 0 for φ = x on a flat box
    let c = Chart::open_box(&[0.0, 0.0], &[32, 32], &[1.0, 1.0])
        .unwrap()
        .into_shared();
    let space = MetricMeasureSpace::flat(ScalarField::from_fn(&c, |x| x[0]), 1.0).unwrap();
    let w = ScalarField::from_fn(&c, |x| x[0].exp());
    let l = laplacian_phi(&space, &w).unwrap();
    assert!(l.sup() < 1e-6);

    let t = torus(64, 2);
    let space = MetricMeasureSpace::flat(ScalarField::constant(&t, 0.3), 2.0).unwrap();
    let l = laplacian_phi(&space, &ScalarField::from_fn(&t, |x| x[0].sin())).unwrap();
    assert!(sup_error(&l, |x| -x[0].sin()) < 1e-5);

    // polar chart: Hess r² = 2g
    let c = polar_box(48);
    let g = Sym2Field::from_fn(&c, |x, i, j| match (i, j) {
        (0, 0) => 1.0,
        (1, 1) => x[0] * x[0],
        _ => 0.0,
    });
    let space = MetricMeasureSpace::new(g.clone(), ScalarField::zeros(&c), 1.0).unwrap();
    let f = ScalarField::from_fn(&c, |x| x[0] * x[0]);
    let h = hessian(&space, &f).unwrap();
    assert!(h.axpy(-2.0, &g).unwrap().sup() < 1e-9);
    let lap = laplacian(&g, &f).unwrap();
    assert!(sup_error(&lap, |_| 4.0) < 1e-9);
}

#[test]
fn weighted_divergence_examples() {
    let t = torus(64, 2);
    let space = MetricMeasureSpace::flat(ScalarField::constant(&t, 1.0), 1.0).unwrap();
    let f = ScalarField::from_fn(&t, |x| x[0].sin() * x[1].cos());
    let div = div_phi(&space, &differential(&f).unwrap()).unwrap();
    let lap = laplacian_phi(&space, &f).unwrap();
    let err = div.sub(&lap).unwrap().sup();
    assert!(err < 1e-4, "{err}");

    // div_φ g = -dφ
    let phi = ScalarField::from_fn(&t, |x| 0.2 * x[1].sin());
    let space = MetricMeasureSpace::flat(phi.clone(), 1.0).unwrap();
    let dg = div_phi(&space, &space.g).unwrap();
    let dphi = differential(&phi).unwrap();
    assert!(dg.axpy(1.0, &dphi).unwrap().sup() < 1e-14);
}

#[test]
fn grad_then_lower_is_identity() {
    let t = torus(16, 3);
    let mut fac = TrigFactory::new(3, &[2.0 * PI; 3], RandomSpec::default());
    let g = sample_sym2(&t, &fac.sym2(1.0));
    let space = MetricMeasureSpace::new(g, fac.scalar().sample(&t), 1.0).unwrap();
    let w = fac.scalar().sample(&t);
    let dw = differential(&w).unwrap();
    let back = lower(&space, &grad(&space, &w).unwrap()).unwrap();
    assert!(back.sub(&dw).unwrap().sup() < 1e-14);
}

#[test]
fn torus_integrals() {
    for dim in 1..=3 {
        let t = torus(8, dim);
        let space = MetricMeasureSpace::flat(ScalarField::zeros(&t), 1.0).unwrap();
        let v = integrate_phi(&space, &ScalarField::constant(&t, 1.0)).unwrap();
        assert!((v - (2.0 * PI).powi(dim as i32)).abs() < 1e-12);
    }
    let t = torus(32, 2);
    let space = MetricMeasureSpace::flat(ScalarField::zeros(&t), 1.0).unwrap();
    let s = integrate_phi(&space, &ScalarField::from_fn(&t, |x| x[0].sin())).unwrap();
    assert!(s.abs() < 1e-13);

    let b = polar_box(16);
    let space = MetricMeasureSpace::flat(ScalarField::zeros(&b), 1.0).unwrap();
    assert!(matches!(
        integrate_phi(&space, &ScalarField::zeros(&b)),
        Err(GridError::ClosedChartRequired(_))
    ));
}

fn random_space(
    n: usize,
    dim: usize,
    seed: u64,
    spec: RandomSpec,
    m: f64,
) -> (MetricMeasureSpace, TrigFactory) {
    let t = torus(n, dim);
    let mut fac = TrigFactory::new(seed, &vec![2.0 * PI; dim], spec);
    let g = sample_sym2(&t, &fac.sym2(1.0));
    let phi = fac.scalar().sample(&t);
    (MetricMeasureSpace::new(g, phi, m).unwrap(), fac)
}

#[test]
fn integration_by_parts_converges() {
    let spec = RandomSpec {
        max_freq: 2,
        amplitude: 0.2,
        terms: 3,
    };
    let ladder = Ladder::run(&[32, 48, 64], 2.0 * PI, |n| {
        let (space, mut fac) = random_space(n, 2, 11, spec, 1.0);
        let c = space.chart().clone();
        let f = fac.scalar().sample(&c);
        let x = CovectorField::from_components(
            c.clone(),
            vec![
                fac.scalar().sample(&c).into_values(),
                fac.scalar().sample(&c).into_values(),
            ],
            Variance::Contravariant,
            0,
        );
        let xl = lower(&space, &x)?;
        let lhs = inner_phi(&space, &differential(&f)?, &xl)?;
        let rhs = integrate_phi(&space, &f.mul(&div_phi(&space, &xl)?)?)?;
        Ok::<f64, GridError>((lhs + rhs).abs())
    })
    .unwrap();
    assert!(ladder.finest() <= 1e-6, "{ladder:?}");
    assert!(ladder.order >= 3.5, "{ladder:?}");
}

#[test]
fn commutator_anchor_converges() {
    let spec = RandomSpec {
        max_freq: 2,
        amplitude: 0.15,
        terms: 3,
    };
    let ladder = Ladder::run(&[24, 32, 48], 2.0 * PI, |n| {
        let (space, mut fac) = random_space(n, 3, 5, spec, 1.0);
        let f = fac.scalar().sample(space.chart());
        Ok::<f64, GridError>(commutator_defect(&space, &f)?.sup())
    })
    .unwrap();
    assert!(ladder.order >= 3.0, "{ladder:?}");
}

#[test]
fn first_bianchi_and_metric_compatibility() {
    let (space, _) = random_space(16, 3, 9, RandomSpec::default(), 1.0);
    let curv = curvature(&space.g).unwrap();
    assert!(first_bianchi_defect(&curv.rm).sup() < 1e-12);
    // Christoffels come from the same jets as g, so ∇g vanishes to round-off
    assert!(metric_compatibility_defect(&space.g).unwrap().sup() < 1e-12);
}
