//! Observed convergence orders from refinement ladders.

use serde::Serialize;

/// Defects below this are treated as round-off and carry no order information.
pub const ROUNDOFF_FLOOR: f64 = 1e-13;

/// Least-squares slope of `ln err` against `ln h`.
///
/// Returns `+∞` when every error sits at the round-off floor (the identity is
/// exact for the discretization) and `NaN` for fewer than two levels.
pub fn observed_order(h: &[f64], err: &[f64]) -> f64 {
    assert_eq!(h.len(), err.len());
    if h.len() < 2 {
        return f64::NAN;
    }
    if err.iter().all(|&e| e <= ROUNDOFF_FLOOR) {
        return f64::INFINITY;
    }
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// One refinement study: resolutions, grid spacings and measured defects.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ladder {
    pub sizes: Vec<usize>,
    pub spacing: Vec<f64>,
    pub errors: Vec<f64>,
    pub order: f64,
}

impl Ladder {
    /// Runs `defect(N)` for each node count; spacing is `period / N`.
    pub fn run<E>(
        sizes: &[usize],
        period: f64,
        mut defect: impl FnMut(usize) -> Result<f64, E>,
    ) -> Result<Ladder, E> {
        let mut errors = Vec::with_capacity(sizes.len());
        for &n in sizes {
            errors.push(defect(n)?);
        }
        let spacing: Vec<f64> = sizes.iter().map(|&n| period / n as f64).collect();
        let order = observed_order(&spacing, &errors);
        Ok(Ladder {
            sizes: sizes.to_vec(),
            spacing,
            errors,
            order,
        })
    }

    /// Defect at the finest level.
    pub fn finest(&self) -> f64 {
        *self.errors.last().unwrap_or(&f64::NAN)
    }
}

/// Refinement ladder `N (1 + j/2)` for `j = 0..levels`, e.g. 32, 48, 64.
pub fn ladder_sizes(base: usize, levels: usize) -> Vec<usize> {
    (0..levels).map(|j| base + base * j / 2).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_power_law() {
        let h = [0.1, 0.05, 0.025];
        let e: Vec<f64> = h.iter().map(|x: &f64| 3.0 * x.powi(4)).collect();
        assert!((observed_order(&h, &e) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn roundoff_is_infinite_order() {
        assert_eq!(observed_order(&[0.1, 0.05], &[1e-16, 2e-16]), f64::INFINITY);
    }

    #[test]
    fn ladder_sizes_match_default() {
        assert_eq!(ladder_sizes(32, 3), vec![32, 48, 64]);
    }
}
