use std::path::PathBuf;

use hyperop_core::QaError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{task} failed: {source}")]
    Task {
        task: &'static str,
        #[source]
        source: QaError,
    },

    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{failed} of {total} acceptance criteria failed")]
    Verification { failed: usize, total: usize },
}

impl CliError {
    pub fn task(task: &'static str) -> impl FnOnce(QaError) -> CliError {
        move |source| CliError::Task { task, source }
    }

    /// Process exit status: 2 for configuration errors, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
