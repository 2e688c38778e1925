use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised across the pipeline.
///
/// Variants are grouped so that callers (the CLI in particular) can map them
/// onto coarse failure classes with [`Error::class`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("record {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("index {index} out of range for {what} of size {len}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },

    #[error("need at least {needed} candidates, got {available}")]
    InsufficientCandidates { needed: usize, available: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse failure classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::Dimension(_) | Error::InsufficientCandidates { .. } => ErrorClass::Config,
            Error::Data(_) | Error::Malformed { .. } | Error::IndexOutOfRange { .. } | Error::Io(_) => ErrorClass::Data,
            Error::Numerical(_) | Error::Diverged { .. } => ErrorClass::Numerical,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let line = err.position().map(|p| p.line() as usize).unwrap_or(0);
        Error::Malformed {
            line,
            message: err.to_string(),
        }
    }
}
