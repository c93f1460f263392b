use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("entry {index} is +inf, the order-unit norm is infinite")]
    InfiniteNorm { index: usize },

    #[error("undefined operation on +inf: {0}")]
    UndefinedInfinity(&'static str),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("invalid order unit: {0}")]
    InvalidOrderUnit(String),

    #[error("invalid filter: {0}")]
    InvalidFilter(String),

    #[error("average undefined: term {n} has an infinite entry")]
    UndefinedAverage { n: usize },

    #[error("set has infinite measure: {0}")]
    InfiniteMeasure(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("not integrable: {0}")]
    NotIntegrable(String),

    #[error("integral diverges: {0}")]
    Divergent(String),

    #[error("function outside the operator domain: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
