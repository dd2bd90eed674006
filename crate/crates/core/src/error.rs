use thiserror::Error;

use crate::means_n::SolveTrace;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeansError {
    /// Input violates a structural precondition (shape, symmetry, weights, parameter domain).
    #[error("validation error: {0}")]
    Validation(String),

    /// A scalar function or constant was evaluated outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("eigensolver did not converge after {iterations} sweeps")]
    Eigensolver { iterations: usize },

    #[error(
        "fixed-point solver did not converge: {} iterations, residual {:e}",
        trace.iterations,
        trace.residual
    )]
    NonConvergence { trace: SolveTrace },
}

impl MeansError {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        MeansError::Validation(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        MeansError::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, MeansError>;
