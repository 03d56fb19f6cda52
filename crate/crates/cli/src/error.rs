use coq_core::{BackendError, DatasetError, PipelineError};
use thiserror::Error;

/// Process exit codes.
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_TRANSPORT: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("backend failure: {0}")]
    Backend(BackendError),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Dataset(_) => EXIT_USAGE,
            CliError::Backend(BackendError::Config(_) | BackendError::InvalidDecoding(_)) => EXIT_USAGE,
            CliError::Backend(_) => EXIT_TRANSPORT,
            CliError::Io(_) => 1,
        }
    }

    pub fn io(what: impl std::fmt::Display, err: std::io::Error) -> Self {
        CliError::Io(format!("{what}: {err}"))
    }
}

impl From<PipelineError> for CliError {
    fn from(err: PipelineError) -> Self {
        match err {
            PipelineError::Backend(b) => CliError::Backend(b),
            other => CliError::Io(other.to_string()),
        }
    }
}
