//! Shared fixtures for the benchmarks in `benches/`.

use std::f64::consts::PI;

use wcurvlab_core::fixtures::{sample_sym2, RandomSpec, TrigFactory};
use wcurvlab_core::grid::{Chart, MetricMeasureSpace, ScalarField, Sym2Field};

/// Seeded random metric measure space on the cubic torus `T^dim` with `n` nodes per axis.
pub fn random_torus(n: usize, dim: usize, m: f64) -> MetricMeasureSpace {
    let chart = Chart::torus(&vec![n; dim], &vec![2.0 * PI; dim])
        .expect("valid torus")
        .into_shared();
    let mut fac = TrigFactory::new(42, &vec![2.0 * PI; dim], RandomSpec::default());
    let g = sample_sym2(&chart, &fac.sym2(1.0));
    let phi = fac.scalar().sample(&chart);
    MetricMeasureSpace::new(g, phi, m).expect("positive definite")
}

/// Conformally bumped `T³` with a small potential; it has no static potential.
pub fn bump_space() -> MetricMeasureSpace {
    let c = Chart::torus(&[8; 3], &[2.0 * PI; 3])
        .expect("valid torus")
        .into_shared();
    let g = Sym2Field::conformal(&ScalarField::from_fn(&c, |x| 1.0 + 0.1 * x[0].sin()));
    MetricMeasureSpace::new(g, ScalarField::from_fn(&c, |x| 0.1 * x[1].cos()), 2.0)
        .expect("positive definite")
}
