use alloc::string::String;

/// Errors raised by the closed-form and numerical routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("angle {0} is outside [0, pi]")]
    AngleOutOfRange(f64),

    #[error("invalid covariance model: {0}")]
    InvalidModel(String),

    #[error("operation requires an isotropic model")]
    NotIsotropic,

    #[error("quadrature did not converge: relative change {achieved:e} after {evaluations} evaluations")]
    QuadratureNotConverged { achieved: f64, evaluations: usize },

    #[error("invalid zonotope: {0}")]
    InvalidZonotope(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = core::result::Result<T, Error>;
