//! Error type for the std crate and its mapping to process exit codes.

use std::path::PathBuf;

/// Errors raised by IO, configuration and pipelines.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Malformed command line or unknown flag.
    #[error("usage error: {0}")]
    Usage(String),

    /// Input rejected after parsing (bad values, inconsistent settings).
    #[error("validation error: {0}")]
    Validation(String),

    /// Error from the numerical core.
    #[error(transparent)]
    Core(#[from] saea_core::Error),

    /// Filesystem error on a specific path.
    #[error("io error on {path}: {source}")]
    Io {
        /// File or directory involved.
        path: PathBuf,
        /// Underlying error.
        source: std::io::Error,
    },

    /// JSON (de)serialization error.
    #[error("json error in {context}: {source}")]
    Json {
        /// What was being read or written.
        context: String,
        /// Underlying error.
        source: serde_json::Error,
    },

    /// CSV content that cannot be parsed. Row and column are 1-based,
    /// counting data rows after any header.
    #[error("csv error in {path} at row {row}, column {col}: {message}")]
    Csv {
        /// File being read.
        path: PathBuf,
        /// 1-based data row.
        row: usize,
        /// 1-based column.
        col: usize,
        /// What went wrong.
        message: String,
    },
}

/// Result alias for this crate.
pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    /// Process exit code: 2 for usage errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    /// Short machine-readable category.
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Validation(_) => "validation",
            CliError::Core(_) => "core",
            CliError::Io { .. } => "io",
            CliError::Json { .. } => "json",
            CliError::Csv { .. } => "csv",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        CliError::Json {
            context: context.into(),
            source,
        }
    }
}
