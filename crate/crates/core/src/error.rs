use alloc::string::String;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("covariance generation failed after {0} attempts")]
    GenerationFailed(usize),
    #[error("ill-conditioned block: {0}")]
    IllConditioned(String),
    #[error("degenerate distribution: correlation {0} is not below 1")]
    Degenerate(f64),
    #[error("precision limit: {0}")]
    Precision(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("degenerate state: zero norm")]
    DegenerateState,
    #[error("input is not normalized (sum of squares {0})")]
    Normalization(f64),
    #[error("pivot degeneracy: {0}")]
    PivotDegeneracy(String),
    #[error("rank deficient matrix")]
    Rank,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid circuit: {0}")]
    CircuitValidity(String),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("numerical routine did not converge")]
    NoConvergence,
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
