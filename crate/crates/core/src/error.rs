use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("feature index {index} out of range for arity {arity}")]
    IndexOutOfRange { index: usize, arity: usize },

    #[error("vector arity mismatch: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("lattice too large: {present} present features exceeds enumeration limit {limit}")]
    LatticeTooLarge { present: usize, limit: usize },

    #[error("type error: {0}")]
    Type(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("capacity overflow while building flow network")]
    CapacityOverflow,

    #[error("too many distinct vectors for exhaustive search: {got} > {max}")]
    TooManyVectors { got: usize, max: usize },

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("single-class input: {0}")]
    SingleClass(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("{stage}: {source}")]
    Stage { stage: String, source: Box<Error> },
}

impl Error {
    /// Wraps the error with the pipeline stage it came from.
    pub fn at(self, stage: impl Into<String>) -> Self {
        Error::Stage { stage: stage.into(), source: Box::new(self) }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
