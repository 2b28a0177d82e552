use thiserror::Error;

/// Errors raised by the geometry kernels and the mass integrators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GbcError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("point outside the domain: {0}")]
    Domain(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("integrand is not integrable: {0}")]
    NonIntegrable(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, GbcError>;
