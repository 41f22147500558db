use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("unidentifiable parameter: {0}")]
    Unidentifiable(String),

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("undefined SNR: {0}")]
    UndefinedSnr(String),

    #[error("line {line}: {message}")]
    Ingestion { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn ingest(line: usize, msg: impl Into<String>) -> Self {
        Error::Ingestion {
            line,
            message: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
