//! Seeded trigonometric test fields with closed-form derivatives.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{Chart, ScalarField, Sym2Field};

#[derive(Debug, Clone, PartialEq)]
pub struct TrigTerm {
    /// Integer frequency per axis.
    pub k: Vec<i32>,
    pub cos: f64,
    pub sin: f64,
}

/// `c0 + Σ cos_j cos(κ_j·x) + sin_j sin(κ_j·x)` with `κ_j = 2π k_j / L`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigSeries {
    pub c0: f64,
    pub periods: Vec<f64>,
    pub terms: Vec<TrigTerm>,
}

impl TrigSeries {
    pub fn constant(periods: &[f64], c0: f64) -> Self {
        TrigSeries {
            c0,
            periods: periods.to_vec(),
            terms: Vec::new(),
        }
    }

    fn wave(&self, t: &TrigTerm) -> Vec<f64> {
        t.k.iter()
            .zip(&self.periods)
            .map(|(&k, &l)| 2.0 * PI * k as f64 / l)
            .collect()
    }

    fn phase(kap: &[f64], x: &[f64]) -> f64 {
        kap.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.c0
            + self
                .terms
                .iter()
                .map(|t| {
                    let th = Self::phase(&self.wave(t), x);
                    t.cos * th.cos() + t.sin * th.sin()
                })
                .sum::<f64>()
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.periods.len()];
        for t in &self.terms {
            let kap = self.wave(t);
            let th = Self::phase(&kap, x);
            let s = -t.cos * th.sin() + t.sin * th.cos();
            for (gi, ki) in g.iter_mut().zip(&kap) {
                *gi += s * ki;
            }
        }
        g
    }

    /// Second partials `∂_a ∂_b`.
    pub fn hess(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n = self.periods.len();
        let mut h = vec![vec![0.0; n]; n];
        for t in &self.terms {
            let kap = self.wave(t);
            let th = Self::phase(&kap, x);
            let s = -(t.cos * th.cos() + t.sin * th.sin());
            for a in 0..n {
                for b in 0..n {
                    h[a][b] += s * kap[a] * kap[b];
                }
            }
        }
        h
    }

    pub fn sample(&self, chart: &Arc<Chart>) -> ScalarField {
        ScalarField::from_fn(chart, |x| self.eval(x))
    }

    /// Random series with `nterms` modes of frequency at most `max_freq` per
    /// axis; the absolute coefficients sum to `amplitude`.
    pub fn random<R: Rng>(
        rng: &mut R,
        periods: &[f64],
        max_freq: i32,
        amplitude: f64,
        nterms: usize,
    ) -> Self {
        let n = periods.len();
        let mut terms = Vec::with_capacity(nterms);
        for _ in 0..nterms {
            let mut k: Vec<i32> = (0..n)
                .map(|_| rng.random_range(-max_freq..=max_freq))
                .collect();
            if k.iter().all(|&v| v == 0) {
                let a = rng.random_range(0..n);
                k[a] = rng.random_range(1..=max_freq.max(1));
            }
            terms.push(TrigTerm {
                k,
                cos: rng.random_range(-1.0..1.0),
                sin: rng.random_range(-1.0..1.0),
            });
        }
        let total: f64 = terms.iter().map(|t| t.cos.abs() + t.sin.abs()).sum();
        if total > 0.0 {
            for t in &mut terms {
                t.cos *= amplitude / total;
                t.sin *= amplitude / total;
            }
        }
        TrigSeries {
            c0: 0.0,
            periods: periods.to_vec(),
            terms,
        }
    }
}

/// Knobs for seeded random fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomSpec {
    pub max_freq: i32,
    pub amplitude: f64,
    pub terms: usize,
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec {
            max_freq: 3,
            amplitude: 0.2,
            terms: 3,
        }
    }
}

/// Generator of random smooth fields on a torus with fixed periods, so that
/// the same seed yields the same continuum fields at every resolution.
pub struct TrigFactory {
    rng: ChaCha8Rng,
    periods: Vec<f64>,
    pub spec: RandomSpec,
}

impl TrigFactory {
    pub fn new(seed: u64, periods: &[f64], spec: RandomSpec) -> Self {
        TrigFactory {
            rng: ChaCha8Rng::seed_from_u64(seed),
            periods: periods.to_vec(),
            spec,
        }
    }

    pub fn scalar(&mut self) -> TrigSeries {
        TrigSeries::random(
            &mut self.rng,
            &self.periods,
            self.spec.max_freq,
            self.spec.amplitude,
            self.spec.terms,
        )
    }

    /// Symmetric 2-tensor series. With `base = 1` the diagonal carries the
    /// identity and off-diagonal entries are damped by `1/n`, which keeps the
    /// result positive definite by diagonal dominance for amplitudes below 1/2.
    pub fn sym2(&mut self, base: f64) -> Vec<TrigSeries> {
        let n = self.periods.len();
        let mut out = Vec::new();
        for a in 0..n {
            for b in a..n {
                let mut s = self.scalar();
                if a == b {
                    s.c0 = base;
                } else {
                    for t in &mut s.terms {
                        t.cos /= n as f64;
                        t.sin /= n as f64;
                    }
                }
                out.push(s);
            }
        }
        out
    }
}

pub fn sample_sym2(chart: &Arc<Chart>, comps: &[TrigSeries]) -> Sym2Field {
    let n = chart.dim();
    Sym2Field::from_fn(chart, |x, i, j| {
        comps[crate::grid::sym_index(n, i, j)].eval(x)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_match_finite_differences() {
        let mut f = TrigFactory::new(7, &[2.0 * PI, 3.0], RandomSpec::default());
        let s = f.scalar();
        let x = [0.3, 1.1];
        let h = 1e-5;
        let g = s.grad(&x);
        let fd0 = (s.eval(&[x[0] + h, x[1]]) - s.eval(&[x[0] - h, x[1]])) / (2.0 * h);
        assert!((g[0] - fd0).abs() < 1e-8);
        let hs = s.hess(&x);
        let fd01 = (s.grad(&[x[0], x[1] + h])[0] - s.grad(&[x[0], x[1] - h])[0]) / (2.0 * h);
        assert!((hs[0][1] - fd01).abs() < 1e-7);
    }

    #[test]
    fn seeds_are_reproducible() {
        let a = TrigFactory::new(42, &[1.0; 3], RandomSpec::default()).scalar();
        let b = TrigFactory::new(42, &[1.0; 3], RandomSpec::default()).scalar();
        assert_eq!(a, b);
        let amp: f64 = a.terms.iter().map(|t| t.cos.abs() + t.sin.abs()).sum();
        assert!((amp - 0.2).abs() < 1e-12);
    }
}
