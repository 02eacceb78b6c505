//! Crate-wide error type.

use thiserror::Error;

/// Failure modes shared by all estimation stages.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A value violates its documented domain (negative radius, empty grid, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Two containers that must agree in shape do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Input is structurally valid but carries no usable signal.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn mismatch(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateInput(msg.into())
    }
}
