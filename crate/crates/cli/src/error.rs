use thiserror::Error;

use wcurvlab_core::grid::GridError;
use wcurvlab_core::Error as CoreError;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const VERIFICATION_FAILED: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NOT_CONVERGED: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid or inconsistent configuration, with the offending path.
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn config(path: &str, msg: impl std::fmt::Display) -> Self {
        CliError::Config(format!("{path}: {msg}"))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => exit::CONFIG,
            CliError::Core(e) if is_solver_failure(e) => exit::NOT_CONVERGED,
            CliError::Core(_) => exit::CONFIG,
        }
    }
}

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        CliError::Core(e.into())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Errors that mean a solver ran and could not finish, as opposed to bad input.
pub fn is_solver_failure(e: &CoreError) -> bool {
    matches!(
        e,
        CoreError::NotConverged { .. }
            | CoreError::StepRejected { .. }
            | CoreError::AllScalesFailed { .. }
            | CoreError::KernelNonempty { .. }
            | CoreError::FloorHit { .. }
            | CoreError::Eigen(_)
            | CoreError::Solve(_)
    )
}

pub type Result<T> = std::result::Result<T, CliError>;
