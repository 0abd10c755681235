use std::sync::Arc;

use rayon::prelude::*;

use super::chart::Chart;
use super::GridError;

/// Index of the stored component `(i, j)` of a symmetric 2-tensor
/// (upper triangle, row-major).
#[inline]
pub fn sym_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * i.saturating_sub(1) / 2 + (j - i)
}

/// Number of stored components of a symmetric 2-tensor.
#[inline]
pub fn sym_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Index of the antisymmetric pair `(i, j)`, `i < j`.
#[inline]
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

#[inline]
pub fn pair_len(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Common surface of all grid-sampled tensor fields: a chart, a list of
/// component arrays (one value per node each) and a validity margin.
pub trait GridField: Sized + Clone + Send + Sync {
    fn chart(&self) -> &Arc<Chart>;
    fn margin(&self) -> usize;
    fn components(&self) -> &[Vec<f64>];
    /// Field of the same valence on the same chart with new data.
    fn with_components(&self, comps: Vec<Vec<f64>>, margin: usize) -> Self;

    /// Largest absolute component value over valid nodes.
    fn sup(&self) -> f64 {
        let chart = self.chart();
        let m = self.margin();
        self.components()
            .iter()
            .map(|c| {
                c.iter()
                    .enumerate()
                    .filter(|(k, _)| chart.is_valid(*k, m))
                    .fold(0.0f64, |acc, (_, v)| acc.max(v.abs()))
            })
            .fold(0.0, f64::max)
    }

    fn is_finite(&self) -> bool {
        self.components()
            .iter()
            .all(|c| c.iter().all(|v| v.is_finite()))
    }

    fn scaled(&self, s: f64) -> Self {
        let comps = self
            .components()
            .iter()
            .map(|c| c.iter().map(|v| v * s).collect())
            .collect();
        self.with_components(comps, self.margin())
    }

    /// `self + s * other`, margins combined.
    fn axpy(&self, s: f64, other: &Self) -> Result<Self, GridError> {
        same_chart(self.chart(), other.chart())?;
        let comps = self
            .components()
            .iter()
            .zip(other.components())
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + s * y).collect())
            .collect();
        Ok(self.with_components(comps, self.margin().max(other.margin())))
    }

    fn sub(&self, other: &Self) -> Result<Self, GridError> {
        self.axpy(-1.0, other)
    }

    /// Pointwise max-abs over components, as a scalar field.
    fn pointwise_norm(&self) -> ScalarField {
        let n = self.chart().len();
        let values = (0..n)
            .map(|k| {
                self.components()
                    .iter()
                    .fold(0.0f64, |acc, c| acc.max(c[k].abs()))
            })
            .collect();
        ScalarField::from_values(self.chart().clone(), values, self.margin())
    }
}

pub(crate) fn same_chart(a: &Arc<Chart>, b: &Arc<Chart>) -> Result<(), GridError> {
    if Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(GridError::ChartMismatch)
    }
}

/// Evaluates `f` at every node coordinate, in parallel.
pub(crate) fn sample(chart: &Chart, f: impl Fn(&[f64]) -> f64 + Sync) -> Vec<f64> {
    (0..chart.len())
        .into_par_iter()
        .map(|k| f(&chart.coords(k)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    chart: Arc<Chart>,
    values: Vec<f64>,
    margin: usize,
}

impl ScalarField {
    pub fn from_values(chart: Arc<Chart>, values: Vec<f64>, margin: usize) -> Self {
        assert_eq!(values.len(), chart.len(), "scalar field length mismatch");
        ScalarField {
            chart,
            values,
            margin,
        }
    }

    pub fn from_fn(chart: &Arc<Chart>, f: impl Fn(&[f64]) -> f64 + Sync) -> Self {
        let values = sample(chart, f);
        ScalarField {
            chart: chart.clone(),
            values,
            margin: 0,
        }
    }

    pub fn constant(chart: &Arc<Chart>, c: f64) -> Self {
        ScalarField {
            chart: chart.clone(),
            values: vec![c; chart.len()],
            margin: 0,
        }
    }

    pub fn zeros(chart: &Arc<Chart>) -> Self {
        Self::constant(chart, 0.0)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, node: usize) -> f64 {
        self.values[node]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField {
            chart: self.chart.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            margin: self.margin,
        }
    }

    /// Pointwise product.
    pub fn mul(&self, other: &ScalarField) -> Result<Self, GridError> {
        same_chart(&self.chart, &other.chart)?;
        Ok(ScalarField {
            chart: self.chart.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
            margin: self.margin.max(other.margin),
        })
    }

    /// Largest minus smallest value over valid nodes.
    pub fn variation(&self) -> f64 {
        let (lo, hi) = self.range();
        hi - lo
    }

    /// (min, max) over valid nodes.
    pub fn range(&self) -> (f64, f64) {
        self.values
            .iter()
            .enumerate()
            .filter(|(k, _)| self.chart.is_valid(*k, self.margin))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, &v)| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Mean over valid nodes.
    pub fn mean(&self) -> f64 {
        let valid: Vec<f64> = self
            .values
            .iter()
            .enumerate()
            .filter(|(k, _)| self.chart.is_valid(*k, self.margin))
            .map(|(_, &v)| v)
            .collect();
        valid.iter().sum::<f64>() / valid.len().max(1) as f64
    }
}

impl GridField for ScalarField {
    fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }
    fn margin(&self) -> usize {
        self.margin
    }
    fn components(&self) -> &[Vec<f64>] {
        std::slice::from_ref(&self.values)
    }
    fn with_components(&self, mut comps: Vec<Vec<f64>>, margin: usize) -> Self {
        assert_eq!(comps.len(), 1);
        ScalarField {
            chart: self.chart.clone(),
            values: comps.pop().unwrap(),
            margin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variance {
    Covariant,
    Contravariant,
}

/// A one-form or vector field; `variance` tells which.
#[derive(Debug, Clone, PartialEq)]
pub struct CovectorField {
    chart: Arc<Chart>,
    comps: Vec<Vec<f64>>,
    variance: Variance,
    margin: usize,
}

pub type VectorField = CovectorField;

impl CovectorField {
    pub fn from_components(
        chart: Arc<Chart>,
        comps: Vec<Vec<f64>>,
        variance: Variance,
        margin: usize,
    ) -> Self {
        assert_eq!(comps.len(), chart.dim());
        for c in &comps {
            assert_eq!(c.len(), chart.len());
        }
        CovectorField {
            chart,
            comps,
            variance,
            margin,
        }
    }

    pub fn from_fn(
        chart: &Arc<Chart>,
        variance: Variance,
        f: impl Fn(&[f64], usize) -> f64 + Sync,
    ) -> Self {
        let comps = (0..chart.dim())
            .map(|i| sample(chart, |x| f(x, i)))
            .collect();
        CovectorField {
            chart: chart.clone(),
            comps,
            variance,
            margin: 0,
        }
    }

    pub fn zeros(chart: &Arc<Chart>, variance: Variance) -> Self {
        CovectorField {
            chart: chart.clone(),
            comps: vec![vec![0.0; chart.len()]; chart.dim()],
            variance,
            margin: 0,
        }
    }

    pub fn variance(&self) -> Variance {
        self.variance
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.comps[i]
    }

    pub fn at(&self, node: usize, i: usize) -> f64 {
        self.comps[i][node]
    }
}

impl GridField for CovectorField {
    fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }
    fn margin(&self) -> usize {
        self.margin
    }
    fn components(&self) -> &[Vec<f64>] {
        &self.comps
    }
    fn with_components(&self, comps: Vec<Vec<f64>>, margin: usize) -> Self {
        CovectorField {
            chart: self.chart.clone(),
            comps,
            variance: self.variance,
            margin,
        }
    }
}

/// Symmetric covariant 2-tensor; only the upper triangle is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Sym2Field {
    chart: Arc<Chart>,
    comps: Vec<Vec<f64>>,
    margin: usize,
}

impl Sym2Field {
    pub fn from_components(chart: Arc<Chart>, comps: Vec<Vec<f64>>, margin: usize) -> Self {
        assert_eq!(comps.len(), sym_len(chart.dim()));
        for c in &comps {
            assert_eq!(c.len(), chart.len());
        }
        Sym2Field {
            chart,
            comps,
            margin,
        }
    }

    /// `f(x, i, j)` is called for `i <= j` only.
    pub fn from_fn(chart: &Arc<Chart>, f: impl Fn(&[f64], usize, usize) -> f64 + Sync) -> Self {
        let n = chart.dim();
        let mut comps = Vec::with_capacity(sym_len(n));
        for i in 0..n {
            for j in i..n {
                comps.push(sample(chart, |x| f(x, i, j)));
            }
        }
        Sym2Field {
            chart: chart.clone(),
            comps,
            margin: 0,
        }
    }

    /// The Euclidean metric `δ_ij` of the chart coordinates.
    pub fn euclidean(chart: &Arc<Chart>) -> Self {
        Self::from_fn(chart, |_, i, j| if i == j { 1.0 } else { 0.0 })
    }

    /// `c(x) δ_ij`.
    pub fn conformal(factor: &ScalarField) -> Self {
        let chart = factor.chart().clone();
        let n = chart.dim();
        let mut comps = Vec::with_capacity(sym_len(n));
        for i in 0..n {
            for j in i..n {
                comps.push(if i == j {
                    factor.values().to_vec()
                } else {
                    vec![0.0; chart.len()]
                });
            }
        }
        Sym2Field {
            chart,
            comps,
            margin: factor.margin(),
        }
    }

    pub fn zeros(chart: &Arc<Chart>) -> Self {
        Self::from_fn(chart, |_, _, _| 0.0)
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn component(&self, i: usize, j: usize) -> &[f64] {
        &self.comps[sym_index(self.dim(), i, j)]
    }

    pub fn at(&self, node: usize, i: usize, j: usize) -> f64 {
        self.comps[sym_index(self.dim(), i, j)][node]
    }

    /// Full `n x n` matrix at a node, row-major.
    pub fn matrix_at(&self, node: usize) -> Vec<f64> {
        let n = self.dim();
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = self.at(node, i, j);
            }
        }
        m
    }

    /// Multiplies each component pointwise by a scalar field.
    pub fn scale_by(&self, s: &ScalarField) -> Result<Self, GridError> {
        same_chart(&self.chart, s.chart())?;
        let comps = self
            .comps
            .iter()
            .map(|c| c.iter().zip(s.values()).map(|(a, b)| a * b).collect())
            .collect();
        Ok(Sym2Field {
            chart: self.chart.clone(),
            comps,
            margin: self.margin.max(s.margin()),
        })
    }
}

impl GridField for Sym2Field {
    fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }
    fn margin(&self) -> usize {
        self.margin
    }
    fn components(&self) -> &[Vec<f64>] {
        &self.comps
    }
    fn with_components(&self, comps: Vec<Vec<f64>>, margin: usize) -> Self {
        Sym2Field {
            chart: self.chart.clone(),
            comps,
            margin,
        }
    }
}

/// Covariant 4-tensor with the algebraic symmetries of a curvature tensor:
/// `R_ijkl = -R_jikl = -R_ijlk = R_klij`. Stored as a symmetric matrix over
/// antisymmetric index pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Riemann4Field {
    chart: Arc<Chart>,
    comps: Vec<Vec<f64>>,
    margin: usize,
}

impl Riemann4Field {
    pub fn from_components(chart: Arc<Chart>, comps: Vec<Vec<f64>>, margin: usize) -> Self {
        assert_eq!(comps.len(), sym_len(pair_len(chart.dim())));
        Riemann4Field {
            chart,
            comps,
            margin,
        }
    }

    pub fn zeros(chart: &Arc<Chart>) -> Self {
        let k = sym_len(pair_len(chart.dim()));
        Riemann4Field {
            chart: chart.clone(),
            comps: vec![vec![0.0; chart.len()]; k],
            margin: 0,
        }
    }

    /// Number of stored components for dimension `n`.
    pub fn stored_len(n: usize) -> usize {
        sym_len(pair_len(n))
    }

    /// Storage slot and sign for `(i, j, k, l)`; `None` when the entry vanishes
    /// by antisymmetry.
    #[inline]
    pub fn slot(n: usize, i: usize, j: usize, k: usize, l: usize) -> Option<(usize, f64)> {
        if i == j || k == l {
            return None;
        }
        let (a, s1) = if i < j {
            (pair_index(n, i, j), 1.0)
        } else {
            (pair_index(n, j, i), -1.0)
        };
        let (b, s2) = if k < l {
            (pair_index(n, k, l), 1.0)
        } else {
            (pair_index(n, l, k), -1.0)
        };
        Some((sym_index(pair_len(n), a, b), s1 * s2))
    }

    pub fn at(&self, node: usize, i: usize, j: usize, k: usize, l: usize) -> f64 {
        match Self::slot(self.chart.dim(), i, j, k, l) {
            Some((s, sign)) => sign * self.comps[s][node],
            None => 0.0,
        }
    }
}

impl GridField for Riemann4Field {
    fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }
    fn margin(&self) -> usize {
        self.margin
    }
    fn components(&self) -> &[Vec<f64>] {
        &self.comps
    }
    fn with_components(&self, comps: Vec<Vec<f64>>, margin: usize) -> Self {
        Riemann4Field {
            chart: self.chart.clone(),
            comps,
            margin,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sym_index_is_upper_triangle_row_major() {
        let n = 4;
        let mut expect = 0;
        for i in 0..n {
            for j in i..n {
                assert_eq!(sym_index(n, i, j), expect);
                assert_eq!(sym_index(n, j, i), expect);
                expect += 1;
            }
        }
        assert_eq!(expect, sym_len(n));
    }

    #[test]
    fn pair_index_is_dense() {
        let n = 5;
        let mut expect = 0;
        for i in 0..n {
            for j in i + 1..n {
                assert_eq!(pair_index(n, i, j), expect);
                expect += 1;
            }
        }
        assert_eq!(expect, pair_len(n));
    }

    #[test]
    fn riemann_slots_carry_symmetries() {
        let n = 3;
        let (s, sign) = Riemann4Field::slot(n, 0, 1, 0, 2).unwrap();
        assert_eq!(Riemann4Field::slot(n, 1, 0, 0, 2), Some((s, -sign)));
        assert_eq!(Riemann4Field::slot(n, 0, 1, 2, 0), Some((s, -sign)));
        assert_eq!(Riemann4Field::slot(n, 0, 2, 0, 1), Some((s, sign)));
        assert_eq!(Riemann4Field::slot(n, 1, 1, 0, 2), None);
    }
}
