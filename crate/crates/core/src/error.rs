use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised anywhere in the analysis pipeline.
///
/// The variants are grouped by the process exit code the CLI maps them to,
/// see [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("invalid scenario field `{field}`: {message}")]
    Scenario { field: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("row {row}, column `{column}`: {message}")]
    Parse {
        row: u64,
        column: String,
        message: String,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate tail: {0}")]
    DegenerateTail(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(row: u64, column: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            row,
            column: column.into(),
            message: message.into(),
        }
    }

    /// 0 success, 1 config, 2 I/O, 3 parse (fail-fast), 4 internal invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Scenario { .. } => 1,
            Error::Io { .. } => 2,
            Error::Parse { .. } => 3,
            Error::InsufficientData(_)
            | Error::DegenerateTail(_)
            | Error::Domain(_)
            | Error::Invariant(_) => 4,
        }
    }
}
