//! Command failures and their exit codes.

use std::path::PathBuf;

use serde_json::json;

/// Exit code for a failed `verify`.
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] timeorder_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
    #[error("verification failed: {0}")]
    Verify(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_config_error() => EXIT_CONFIG,
            CliError::Core(_) => EXIT_NUMERICAL,
            CliError::Io { .. } => EXIT_IO,
            CliError::Usage(_) => EXIT_CONFIG,
            CliError::Verify(_) => EXIT_VERIFY_FAILED,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Io { .. } => "io",
            CliError::Usage(_) => "usage",
            CliError::Verify(_) => "verify",
        }
    }

    /// Single-line JSON record written to stderr on failure.
    pub fn record(&self) -> String {
        json!({"error": {"kind": self.kind(), "message": self.to_string(), "exit_code": self.exit_code()}}).to_string()
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
