use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },

    #[error("sample id {id} out of range for dataset of size {dataset_size}")]
    IdOutOfRange { id: u32, dataset_size: usize },

    #[error("batch of length {got} does not match batch size {expected}")]
    BatchSize { expected: usize, got: usize },

    #[error("cannot estimate a distribution from an empty schedule")]
    EmptySchedule,

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid parameter `{field}`: {message}")]
    InvalidParam { field: &'static str, message: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite {what} at step {step}")]
    NonFinite { what: &'static str, step: u64 },

    #[error("validation split is empty")]
    EmptyValidation,

    #[error("alternation {alternation}, interval {interval}: {source}")]
    Search {
        alternation: usize,
        interval: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    Config(String),

    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn param(field: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParam { field, message: message.into() }
    }

    pub(crate) fn at(self, alternation: usize, interval: usize) -> Self {
        match self {
            e @ Error::Search { .. } => e,
            e => Error::Search { alternation, interval, source: Box::new(e) },
        }
    }
}
