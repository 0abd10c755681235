use thiserror::Error;

use crate::grid::GridError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("operator has {unknowns} unknowns, above the assembly cap of {cap}")]
    CapExceeded { unknowns: usize, cap: usize },
    #[error("eigen-solver failure: {0}")]
    Eigen(String),
    #[error("linear solve failed: {0}")]
    Solve(String),
    #[error("kernel nonempty (dimension {dim}): the base space is weighted vacuum static, injectivity of the adjoint fails")]
    KernelNonempty { dim: usize },
    #[error("did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("metric lost invertibility after {halvings} step halvings")]
    StepRejected { halvings: usize },
    #[error("no scale in the sweep succeeded")]
    AllScalesFailed { attempts: Vec<(f64, String)> },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("|f| fell below the floor at x = {x} (f = {f:e}): candidate static horizon")]
    FloorHit { x: f64, f: f64 },
    #[error("f vanishes at node {node} (|f| = {value:e})")]
    VanishingPotential { node: usize, value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
