//! Structured charts, grid-sampled tensor fields and the finite-difference
//! tensor calculus built on them.

mod chart;
mod field;
pub mod local;
mod ops;
pub mod small;
mod space;
mod stencil;

pub use chart::{Axis, Chart, ChartKind, MAX_DIM, MIN_NODES};
pub(crate) use field::same_chart;
pub use field::{
    pair_index, pair_len, sym_index, sym_len, CovectorField, GridField, Riemann4Field, ScalarField,
    Sym2Field, Variance, VectorField,
};
pub(crate) use ops::pack_riemann;
pub use ops::*;
pub use space::MetricMeasureSpace;
pub use stencil::Stencil;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("invalid chart: {0}")]
    InvalidChart(String),
    #[error(
        "margin exhausted on axis {axis}: margin {margin} leaves no interior node out of {nodes}"
    )]
    MarginExhausted {
        axis: usize,
        margin: usize,
        nodes: usize,
    },
    #[error("fields live on different charts")]
    ChartMismatch,
    #[error("singular metric at node {node} (det = {det:e})")]
    SingularMetric { node: usize, det: f64 },
    #[error("axis {axis} out of range for a {dim}-dimensional chart")]
    AxisOutOfRange { axis: usize, dim: usize },
    #[error("{0} requires a closed (periodic torus) chart")]
    ClosedChartRequired(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}
