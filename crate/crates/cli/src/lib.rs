//! Library side of the `decoctl` command-line tool: configuration, dispatch
//! and output writing. The binary only parses arguments and maps errors to
//! exit codes.

pub mod commands;
pub mod config;
pub mod output;

use thiserror::Error;

/// Failure classes, each with its own exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or inconsistent input (exit 2).
    #[error("validation error: {0}")]
    Validation(String),
    /// The numerics refused the problem, e.g. a grid that is too coarse (exit 3).
    #[error("numerical refusal: {0}")]
    Refusal(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    /// Wraps a core error, naming the config block it came from.
    pub fn core(context: &str, e: decoctl_core::Error) -> Self {
        if e.is_numerical_refusal() {
            CliError::Refusal(format!("{context}: {e}"))
        } else {
            CliError::Validation(format!("{context}: {e}"))
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Refusal(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
