use thiserror::Error;

/// Errors produced by the simulation and optimization routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A device channel (or relay channel) was exactly zero where an inverse is needed.
    #[error("singular channel: {0}")]
    SingularChannel(String),

    /// Every local update was the same constant vector, so the global
    /// standard deviation is zero and symbols cannot be normalized.
    #[error("degenerate update: global standard deviation is {0}")]
    DegenerateUpdate(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Normalized MSE is undefined for a zero reference vector.
    #[error("NMSE undefined: reference vector has zero norm")]
    UndefinedNmse,

    /// A configuration document failed to parse or validate.
    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
