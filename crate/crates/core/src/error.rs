//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failure modes of evaluation routines and audits.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum LabError {
    /// Argument outside the mathematical domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A field is not supported where the operation requires it.
    #[error("support violation: {0}")]
    Support(String),

    /// Time stepping produced growth beyond the a priori bound.
    #[error("integrator instability: {0}")]
    Instability(String),

    /// A theorem hypothesis required by the operation is not met.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    /// Degenerate input, for example a vanishing energy at an endpoint.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Grid refinement changed a quantity beyond its tolerance.
    #[error("resolution failure: {0}")]
    Resolution(String),

    /// The input is not an accurate enough solution of its equation.
    #[error("residual too large: {0}")]
    Residual(String),

    /// Parameters fail the conditions of a Carleman estimate.
    #[error("carleman conditions not met: {0}")]
    Condition(String),

    /// Too few points to fit a regression.
    #[error("insufficient points: {0}")]
    InsufficientPoints(String),
}

/// Convenience alias.
pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn domain(msg: impl Into<String>) -> LabError {
    LabError::Domain(msg.into())
}

pub(crate) fn precondition(msg: impl Into<String>) -> LabError {
    LabError::Precondition(msg.into())
}
