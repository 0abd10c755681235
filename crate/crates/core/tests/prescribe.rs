use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use wcurvlab_core::grid::*;
use wcurvlab_core::prescribe::*;
use wcurvlab_core::weighted::weighted_scalar;
use wcurvlab_core::Error;

fn torus(n: usize, dim: usize) -> Arc<Chart> {
    Chart::torus(&vec![n; dim], &vec![2.0 * PI; dim])
        .unwrap()
        .into_shared()
}

fn bump_space() -> MetricMeasureSpace {
    let c = torus(8, 3);
    let g = Sym2Field::conformal(&ScalarField::from_fn(&c, |x| 1.0 + 0.1 * x[0].sin()));
    MetricMeasureSpace::new(g, ScalarField::from_fn(&c, |x| 0.1 * x[1].cos()), 2.0).unwrap()
}

fn bump_target(space: &MetricMeasureSpace) -> ScalarField {
    let r0 = weighted_scalar(space).unwrap();
    r0.axpy(0.01, &ScalarField::from_fn(space.chart(), |x| x[1].sin()))
        .unwrap()
}

fn recomputed(r: &PrescribeResult, target: &ScalarField) -> (ScalarField, f64) {
    let res = weighted_scalar(&r.space).unwrap().sub(target).unwrap();
    let norm = l2_phi(&r.space, &res).unwrap();
    (res, norm)
}

#[test]
fn scaling_identity() {
    let c = torus(16, 2);
    let space = MetricMeasureSpace::flat(ScalarField::from_fn(&c, |x| x[0].sin()), 1.0).unwrap();
    let same = scale_space(&space, 1.0).unwrap();
    assert_eq!(same.g.components(), space.g.components());
    assert_eq!(same.phi.values(), space.phi.values());
}

#[test]
fn scaling_quadruples_weighted_scalar() {
    let c = torus(16, 2);
    let space = MetricMeasureSpace::flat(ScalarField::from_fn(&c, |x| x[0].sin()), 1.0).unwrap();
    let r = weighted_scalar(&space).unwrap();
    let r4 = weighted_scalar(&scale_space(&space, 4.0).unwrap()).unwrap();
    assert!(r4.sub(&r.scaled(4.0)).unwrap().sup() <= 1e-13 * (1.0 + r.sup()));
}

#[test]
fn scaling_round_trip() {
    let space = bump_space();
    let back = scale_space(&scale_space(&space, 0.25).unwrap(), 4.0).unwrap();
    assert!(back.g.sub(&space.g).unwrap().sup() < 1e-15);
    assert!(back.phi.sub(&space.phi).unwrap().sup() < 1e-15);
    assert!(matches!(scale_space(&space, 0.0), Err(Error::Invalid(_))));
    assert!(matches!(scale_space(&space, -2.0), Err(Error::Invalid(_))));
}

#[test]
fn scaling_is_exact_over_six_decades() {
    let space = bump_space();
    let r = weighted_scalar(&space).unwrap();
    for c in [1e-3, 1e-1, 1.0, 7.0, 1e2, 1e3] {
        let rc = weighted_scalar(&scale_space(&space, c).unwrap()).unwrap();
        assert!(
            rc.sub(&r.scaled(c)).unwrap().sup() <= 1e-13 * c * r.sup(),
            "c = {c}"
        );
    }
}

#[test]
fn exact_target_converges_immediately() {
    let space = bump_space();
    let target = weighted_scalar(&space).unwrap();
    let r = newton_prescribe(&space, &target, &PrescribeOptions::default()).unwrap();
    assert_eq!(r.iterations, 0);
    assert_eq!(r.u.sup(), 0.0);
    assert_eq!(r.residual_norm, 0.0);
}

#[test]
fn bump_target_converges() {
    let space = bump_space();
    let target = bump_target(&space);
    let r = newton_prescribe(&space, &target, &PrescribeOptions::default()).unwrap();
    assert!(
        r.iterations <= 10 && r.residual_norm <= 1e-6,
        "{:?}",
        r.trace
    );
    let (res, norm) = recomputed(&r, &target);
    assert!(res.sub(&r.residual).unwrap().sup() <= 1e-14);
    assert!((norm - r.residual_norm).abs() <= 1e-15);
    assert!(r.u.sup() > 0.0);
}

#[test]
fn relinearized_newton_has_a_superlinear_tail() {
    let space = bump_space();
    let target = bump_target(&space);
    let opts = PrescribeOptions {
        mode: JacobianMode::Relinearized,
        tol: 1e-11,
        ..Default::default()
    };
    let r = newton_prescribe(&space, &target, &opts).unwrap();
    let e: Vec<f64> = r.trace.iter().map(|t| t.residual).collect();
    // last triple; a floor-limited final residual only lowers the estimate
    let tail: Vec<f64> = e.iter().copied().filter(|&v| v > 1e-15).collect();
    assert!(tail.len() >= 3, "{e:?}");
    let (a, b, c) = (
        tail[tail.len() - 3],
        tail[tail.len() - 2],
        tail[tail.len() - 1],
    );
    let p = (c / b).ln() / (b / a).ln();
    assert!(p >= 1.5, "{e:?} -> {p}");
}

#[test]
fn frozen_newton_contracts_steadily() {
    let space = bump_space();
    let target = bump_target(&space);
    let opts = PrescribeOptions {
        tol: 1e-11,
        ..Default::default()
    };
    let r = newton_prescribe(&space, &target, &opts).unwrap();
    let e: Vec<f64> = r.trace.iter().map(|t| t.residual).collect();
    assert!(e.windows(2).all(|w| w[1] < 0.05 * w[0]), "{e:?}");
}

#[test]
fn static_base_is_rejected() {
    let c = torus(8, 3);
    let space = MetricMeasureSpace::flat(ScalarField::constant(&c, 0.0), 1.0).unwrap();
    let target = ScalarField::from_fn(&c, |x| 0.01 * x[0].sin());
    let err = newton_prescribe(&space, &target, &PrescribeOptions::default()).unwrap_err();
    assert!(matches!(err, Error::KernelNonempty { dim: 1 }), "{err}");
    assert!(err.to_string().contains("kernel nonempty"));
    let swept = prescribe_with_scaling(
        &space,
        &target,
        &DEFAULT_C_GRID,
        &PrescribeOptions::default(),
    );
    assert!(matches!(swept, Err(Error::KernelNonempty { .. })));
}

#[test]
fn box_charts_are_rejected() {
    let c = Chart::open_box(&[0.0; 2], &[12, 12], &[1.0, 1.0])
        .unwrap()
        .into_shared();
    let space = MetricMeasureSpace::flat(ScalarField::from_fn(&c, |x| x[0]), 1.0).unwrap();
    assert!(newton_prescribe(
        &space,
        &ScalarField::zeros(&c),
        &PrescribeOptions::default()
    )
    .is_err());
}

#[test]
fn scaling_sweep_trivial() {
    let space = bump_space();
    let k = weighted_scalar(&space).unwrap();
    let r = prescribe_with_scaling(&space, &k, &[1.0], &PrescribeOptions::default()).unwrap();
    assert_eq!(r.scale, 1.0);
    assert_eq!(r.iterations, 0);
}

#[test]
fn scaling_sweep_reaches_fifty_times_the_target() {
    let space = bump_space();
    let k = bump_target(&space).scaled(50.0);
    let opts = PrescribeOptions {
        tol: 1e-5,
        ..Default::default()
    };
    let direct = newton_prescribe(&space, &k, &opts);
    assert!(direct.is_err(), "direct solve unexpectedly converged");
    let r = prescribe_with_scaling(&space, &k, &DEFAULT_C_GRID, &opts).unwrap();
    assert!(r.scale > 1.0);
    let (res, norm) = recomputed(&r, &k);
    assert!(norm <= 1e-5, "{norm}");
    assert!(res.sub(&r.residual).unwrap().sup() <= 1e-12);
    assert!(r
        .attempts
        .iter()
        .rev()
        .skip(1)
        .all(|a| a.outcome != "converged"));
}

#[test]
fn scaling_sweep_all_fail() {
    let space = bump_space();
    let k = ScalarField::from_fn(space.chart(), |x| {
        1e4 * (3.0 * x[0]).sin() * (3.0 * x[2]).cos()
    });
    let opts = PrescribeOptions {
        max_iter: 4,
        ..Default::default()
    };
    match prescribe_with_scaling(&space, &k, &[1.0, 2.0], &opts) {
        Err(Error::AllScalesFailed { attempts }) => assert_eq!(attempts.len(), 2),
        other => panic!("{:?}", other.map(|r| r.scale)),
    }
}

#[test]
fn reach_interval_examples() {
    let c = torus(8, 1);
    let r0 = ScalarField::from_fn(&c, |x| 1.0 + 0.1 * x[0].sin());
    let k = ScalarField::from_fn(&c, |x| 2.0 + x[0].cos());
    let (lo, hi) = reach_interval(&r0, &k).unwrap();
    assert!(lo < hi && lo > 0.0);
    // constant K never brackets a non-constant R strictly
    assert!(reach_interval(&r0, &ScalarField::constant(&c, 1.0)).is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn scale_law_holds(c in 1e-3f64..1e3) {
        let space = bump_space();
        let r = weighted_scalar(&space).unwrap();
        let rc = weighted_scalar(&scale_space(&space, c).unwrap()).unwrap();
        prop_assert!(rc.sub(&r.scaled(c)).unwrap().sup() <= 1e-13 * c * r.sup());
    }
}
