//! Crate-wide error type.

use crate::power::PowerCoefficients;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The max-min power optimizer could not certify convergence. The best
    /// feasible coefficients found so far (if any) ride along so a caller can
    /// inspect or salvage them; they are never applied silently.
    #[error("max-min power control failed after {iterations} bisection iterations: {detail}")]
    PowerSolverFailure {
        iterations: usize,
        detail: String,
        last_feasible: Option<Box<PowerCoefficients>>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;

impl SimError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        SimError::InvalidArgument(msg.into())
    }
}
