use thiserror::Error;

/// Errors raised by the estimation and precoding routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("numerically singular system: {0}")]
    Singular(&'static str),
    #[error("degenerate state: {0}")]
    Degenerate(&'static str),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("bisection bracket failure: multiplier exceeded {0:e}")]
    Bracket(f64),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
