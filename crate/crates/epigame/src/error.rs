use thiserror::Error;

/// Errors shared by the analytic and simulation layers.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Construction-time validation or a precondition failed.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The operation is defined only for a different weighting kind.
    #[error("unsupported weighting kind: {0}")]
    UnsupportedKind(&'static str),

    /// An iterative solver exhausted its iteration budget.
    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    /// Random graph generation failed.
    #[error("graph generation failed: {0}")]
    Generation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
