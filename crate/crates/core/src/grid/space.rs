use std::sync::Arc;

use rayon::prelude::*;

use super::chart::Chart;
use super::field::{same_chart, GridField, ScalarField, Sym2Field};
use super::local::metric_values;
use super::GridError;

/// A chart with a metric `g`, a potential `φ` (measure `e^{-φ} dV_g`) and a
/// dimensional parameter `m`.
#[derive(Debug, Clone)]
pub struct MetricMeasureSpace {
    pub g: Sym2Field,
    pub phi: ScalarField,
    pub m: f64,
}

impl MetricMeasureSpace {
    pub fn new(g: Sym2Field, phi: ScalarField, m: f64) -> Result<Self, GridError> {
        same_chart(g.chart(), phi.chart())?;
        if !(m > 0.0 && m.is_finite()) {
            return Err(GridError::InvalidParameter(format!(
                "m must be positive and finite, got {m}"
            )));
        }
        if !g.is_finite() {
            return Err(GridError::NonFinite("metric"));
        }
        if !phi.is_finite() {
            return Err(GridError::NonFinite("potential"));
        }
        let chart = g.chart().clone();
        let margin = g.margin().max(phi.margin());
        chart.check_margin(margin)?;
        (0..chart.len())
            .into_par_iter()
            .filter(|&k| chart.is_valid(k, margin))
            .try_for_each(|k| metric_values(&g, k).map(|_| ()))?;
        Ok(MetricMeasureSpace { g, phi, m })
    }

    /// Flat metric on the chart with the given potential.
    pub fn flat(phi: ScalarField, m: f64) -> Result<Self, GridError> {
        let g = Sym2Field::euclidean(phi.chart());
        Self::new(g, phi, m)
    }

    pub fn chart(&self) -> &Arc<Chart> {
        self.g.chart()
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    /// Validity margin of the inputs themselves.
    pub fn margin(&self) -> usize {
        self.g.margin().max(self.phi.margin())
    }

    /// Per-node quadrature weights `e^{-φ} √|det g| ΔV`.
    pub fn measure_weights(&self) -> Result<Vec<f64>, GridError> {
        let cv = self.chart().cell_volume();
        (0..self.chart().len())
            .into_par_iter()
            .map(|k| {
                let (_, _, det) = metric_values(&self.g, k)?;
                Ok((-self.phi.at(k)).exp() * det.abs().sqrt() * cv)
            })
            .collect()
    }
}
