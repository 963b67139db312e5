use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("class index {label} out of range for k = {k}")]
    InvalidClass { label: usize, k: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid probability vector: {0}")]
    InvalidProbVector(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("insufficient users: n = {n} is smaller than the number of rounds T = {rounds}")]
    InsufficientUsers { n: usize, rounds: usize },

    #[error("dataset line {line}: {message}")]
    Dataset { line: u64, message: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
