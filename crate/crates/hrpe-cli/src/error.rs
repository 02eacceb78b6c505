//! Process-level error type mapping every failure to a documented exit code.
//!
//! The codes are part of the command-line contract: `0` success, `1` I/O,
//! `2` unparseable input (text or binary), `3` violated invariant,
//! `4` degenerate input that parses but carries no usable signal.

use std::path::Path;

use hrpe_core::Error as CoreError;

// ---------------------------------------------------------------------------
// Error type
// ---------------------------------------------------------------------------

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Io(#[from] std::io::Error),

    /// Text input rejected at a specific location.
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },

    /// Binary or CSV input with a structural defect (bad magic, truncation,
    /// wrong version, malformed field).
    #[error("{path}: {message}")]
    Format { path: String, message: String },

    #[error("{0}")]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn parse(path: &Path, line: usize, column: usize, message: impl Into<String>) -> Self {
        CliError::Parse {
            path: path.display().to_string(),
            line,
            column,
            message: message.into(),
        }
    }

    pub fn format(path: &Path, message: impl Into<String>) -> Self {
        CliError::Format { path: path.display().to_string(), message: message.into() }
    }

    /// Shell exit code for this failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Parse { .. } | CliError::Format { .. } => 2,
            CliError::Core(CoreError::InvalidParameter(_))
            | CliError::Core(CoreError::DimensionMismatch(_)) => 3,
            CliError::Core(CoreError::DegenerateInput(_)) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
