use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad or inconsistent input data (unknown ids, invalid coordinates, bad CSV rows).
    #[error("input error: {0}")]
    Input(String),

    /// Malformed graph document.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: u32,
        column: u32,
        message: String,
    },

    /// A quantity is mathematically undefined for the given data.
    #[error("undefined: {0}")]
    Undefined(String),

    /// A numerical routine failed to converge or hit a degenerate case.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{0}")]
    NotApplicable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn undefined(msg: impl Into<String>) -> Self {
        Error::Undefined(msg.into())
    }

    /// True for errors that stem from a numerical routine rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_) | Error::Undefined(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
