use std::path::PathBuf;

use crate::datapool::RowId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error class, used for CLI exit codes and HTTP status mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad configuration or invocation.
    Usage,
    /// Input data cannot be used as given.
    Data,
    /// Failure while running an otherwise valid experiment.
    Runtime,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot access {}: {cause}", path.display())]
    Io { path: PathBuf, cause: std::io::Error },
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("line {line}, column `{column}`: non-numeric value {value:?}")]
    NonNumeric {
        line: u64,
        column: String,
        value: String,
    },
    #[error("line {line}: label {value:?} is not 0 or 1")]
    InvalidLabel { line: u64, value: String },
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("schema mismatch at line {line}: {reason}")]
    Schema { line: u64, reason: String },
    #[error("initial split: {attempts} attempts could not satisfy the class minima")]
    SplitRetriesExhausted { attempts: usize },
    #[error("initial split: fraction {fraction} of {n_rows} rows yields no labeled row")]
    EmptySplit { fraction: f64, n_rows: usize },
    #[error("row {0} is not part of the active pool")]
    UnknownRow(RowId),
    #[error("row {0} is already labeled")]
    AlreadyLabeled(RowId),
    #[error("unlabeled pool is empty")]
    EmptyPool,
    #[error("labeled pool contains a single class")]
    SingleClass,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("LAL regressor has not been fitted")]
    RegressorMissing,
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("runs have mismatched horizons ({0} vs {1})")]
    MismatchedHorizons(usize, usize),
    #[error("{0}")]
    Runtime(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, cause: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            cause,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidConfig(_) | Error::UnknownKey(_) => ErrorCategory::Usage,
            Error::Io { .. }
            | Error::Csv(_)
            | Error::MissingColumn(_)
            | Error::NonNumeric { .. }
            | Error::InvalidLabel { .. }
            | Error::EmptyDataset
            | Error::Schema { .. }
            | Error::SplitRetriesExhausted { .. }
            | Error::EmptySplit { .. }
            | Error::MismatchedHorizons(..) => ErrorCategory::Data,
            _ => ErrorCategory::Runtime,
        }
    }
}
