//! Numerical toolkit for weighted scalar curvature on smooth metric measure
//! spaces: grid tensor calculus, weighted curvature, the linearized weighted
//! scalar curvature and its adjoint, warped products, static profiles and
//! curvature prescription.

// index loops mirror the tensor formulas; negated comparisons reject NaN
#![allow(
    clippy::needless_range_loop,
    clippy::neg_cmp_op_on_partial_ord,
    clippy::type_complexity
)]

pub mod convergence;
pub mod error;
pub mod expr;
pub mod fixtures;
pub mod grid;
pub mod linearization;
pub mod prescribe;
pub mod profile;
pub mod warped;
pub mod weighted;

pub use error::{Error, Result};
