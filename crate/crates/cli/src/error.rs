use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("unknown preset `{0}` (see `noiselab list-presets`)")]
    UnknownPreset(String),
    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config at `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("bad override `{0}`: expected key=value")]
    BadOverride(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Experiment(#[from] noiselab::Error),
    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

impl CliError {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Validation { field: field.into(), message: message.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 2 for usage errors, 1 for experiment and I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::UnknownPreset(_) | CliError::Parse { .. } | CliError::Validation { .. } | CliError::BadOverride(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
