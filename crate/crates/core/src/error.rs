use thiserror::Error;

/// Errors raised by the allocation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("newton iteration did not converge after {iterations} steps (bracket [{lo}, {hi}])")]
    Unconverged { iterations: usize, lo: f64, hi: f64 },

    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;
