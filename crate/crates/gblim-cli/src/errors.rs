//! Error taxonomy of the scenario runner, mapped onto process exit codes.

use std::path::PathBuf;
use thiserror::Error;

/// Everything that can go wrong between reading a scenario file and
/// emitting its artifacts.
#[derive(Debug, Error)]
pub enum CliError {
    /// The scenario file is not well-formed JSON.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// The scenario tree is well-formed but violates the schema; `field`
    /// is the dotted path of the offending entry.
    #[error("validation error: {field}: {reason}")]
    Validation { field: String, reason: String },

    /// A numerical stage failed; `context` narrows the failure down to a
    /// chart or test function where that is meaningful.
    #[error("numerical failure in stage '{stage}' ({context}): {source}")]
    Stage {
        stage: &'static str,
        context: String,
        source: gblim_core::Error,
    },

    /// An artifact could not be written.
    #[error("io error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn stage(stage: &'static str, context: impl Into<String>, source: gblim_core::Error) -> Self {
        CliError::Stage {
            stage,
            context: context.into(),
            source,
        }
    }

    /// Process exit code: 2 for scenario problems, 3 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation { .. } => 2,
            CliError::Stage { .. } | CliError::Io { .. } => 3,
        }
    }
}
