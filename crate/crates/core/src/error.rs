use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad arguments or configuration.
    Usage,
    /// Unreadable or invalid data, or a model that cannot be loaded or run.
    DataOrModel,
    /// Non-finite values or a diverging fit.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at data row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("ragged row {row}: expected {expected} fields, found {found}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("duplicate variable name '{0}'")]
    DuplicateName(String),

    #[error("empty variable name at column {0}")]
    EmptyName(usize),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("degenerate variable '{0}': fewer than two distinct values")]
    DegenerateVariable(String),

    #[error("variable index {index} out of range for p = {p}")]
    VariableIndex { index: usize, p: usize },

    #[error("input width {found} does not match model arity {expected}")]
    WidthMismatch { expected: usize, found: usize },

    #[error("failed to spawn external model '{command}': {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },

    #[error("external model protocol violation: {0}")]
    Protocol(String),

    #[error("non-finite value at row {row}: {what}")]
    NonFinite { row: usize, what: String },

    #[error("training diverged after epoch {last_finite_epoch} (last finite loss)")]
    Divergence { last_finite_epoch: usize },

    #[error("no closed-form oracle for {0}")]
    NoOracle(String),

    #[error("unknown case id '{0}'")]
    UnknownCase(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::NonFinite { .. } | Error::Divergence { .. } => ErrorClass::Numerical,
            Error::InvalidArgument(_) | Error::UnknownCase(_) => ErrorClass::Usage,
            _ => ErrorClass::DataOrModel,
        }
    }
}
