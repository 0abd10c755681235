use super::chart::Chart;
use super::GridError;

/// Central finite-difference weights of even order `p`.
///
/// `first[k]` multiplies `f[j+k+1] - f[j-k-1]`; `second[0]` is the centre
/// weight of the second derivative and `second[k]` multiplies
/// `f[j+k] + f[j-k]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub order: usize,
    first: &'static [f64],
    second: &'static [f64],
}

const FIRST_2: [f64; 1] = [0.5];
const FIRST_4: [f64; 2] = [2.0 / 3.0, -1.0 / 12.0];
const FIRST_6: [f64; 3] = [3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0];
const FIRST_8: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];

const SECOND_2: [f64; 2] = [-2.0, 1.0];
const SECOND_4: [f64; 3] = [-5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];
const SECOND_6: [f64; 4] = [-49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0];
const SECOND_8: [f64; 5] = [
    -205.0 / 72.0,
    8.0 / 5.0,
    -1.0 / 5.0,
    8.0 / 315.0,
    -1.0 / 560.0,
];

impl Stencil {
    pub fn new(order: usize) -> Result<Self, GridError> {
        let (first, second): (&'static [f64], &'static [f64]) = match order {
            2 => (&FIRST_2, &SECOND_2),
            4 => (&FIRST_4, &SECOND_4),
            6 => (&FIRST_6, &SECOND_6),
            8 => (&FIRST_8, &SECOND_8),
            _ => {
                return Err(GridError::InvalidChart(format!(
                    "unsupported stencil order {order}"
                )))
            }
        };
        Ok(Stencil {
            order,
            first,
            second,
        })
    }

    pub fn half_width(&self) -> usize {
        self.order / 2
    }

    pub fn first_weights(&self) -> &[f64] {
        self.first
    }

    pub fn second_weights(&self) -> &[f64] {
        self.second
    }

    /// Fourier symbol of the first-derivative stencil, as a multiple of `i/h`.
    pub fn first_symbol(&self, theta: f64) -> f64 {
        self.first
            .iter()
            .enumerate()
            .map(|(k, w)| 2.0 * w * ((k + 1) as f64 * theta).sin())
            .sum()
    }

    /// Fourier symbol of the second-derivative stencil, as a multiple of `1/h^2`
    /// (non-positive).
    pub fn second_symbol(&self, theta: f64) -> f64 {
        self.second[0]
            + self.second[1..]
                .iter()
                .enumerate()
                .map(|(k, w)| 2.0 * w * ((k + 1) as f64 * theta).cos())
                .sum::<f64>()
    }
}

/// First derivative of node data along `axis`. Open-axis nodes closer than
/// the half-width to a face are left at zero.
pub(crate) fn diff1(chart: &Chart, data: &[f64], axis: usize) -> Vec<f64> {
    let st = chart.stencil();
    let ax = chart.axis(axis);
    let n = ax.nodes;
    let stride = chart.stride(axis);
    let inv_h = 1.0 / ax.spacing();
    let hw = st.half_width();
    let w = st.first_weights();
    let mut out = vec![0.0; data.len()];
    for (node, o) in out.iter_mut().enumerate() {
        let j = chart.index_along(node, axis);
        let base = node - j * stride;
        if ax.periodic {
            let mut acc = 0.0;
            for (k, wk) in w.iter().enumerate() {
                let jp = (j + k + 1) % n;
                let jm = (j + n - (k + 1)) % n;
                acc += wk * (data[base + jp * stride] - data[base + jm * stride]);
            }
            *o = acc * inv_h;
        } else if j >= hw && j + hw < n {
            let mut acc = 0.0;
            for (k, wk) in w.iter().enumerate() {
                acc += wk * (data[node + (k + 1) * stride] - data[node - (k + 1) * stride]);
            }
            *o = acc * inv_h;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_are_consistent() {
        for p in [2, 4, 6, 8] {
            let s = Stencil::new(p).unwrap();
            // first derivative of x: sum 2 k w_k = 1
            let d1: f64 = s
                .first_weights()
                .iter()
                .enumerate()
                .map(|(k, w)| 2.0 * (k + 1) as f64 * w)
                .sum();
            assert!((d1 - 1.0).abs() < 1e-14, "order {p}");
            // second derivative of constants vanishes, of x^2/2 equals one
            let w = s.second_weights();
            let d0: f64 = w[0] + 2.0 * w[1..].iter().sum::<f64>();
            let d2: f64 = w[1..]
                .iter()
                .enumerate()
                .map(|(k, wk)| wk * ((k + 1) as f64).powi(2))
                .sum();
            assert!(d0.abs() < 1e-14);
            assert!((d2 - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn second_symbol_vanishes_only_at_zero_frequency() {
        let s = Stencil::new(4).unwrap();
        assert!(s.second_symbol(0.0).abs() < 1e-14);
        assert!(s.second_symbol(std::f64::consts::PI) < -5.0);
        assert!(s.first_symbol(std::f64::consts::PI).abs() < 1e-15);
    }
}
