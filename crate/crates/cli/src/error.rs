use std::path::{Path, PathBuf};

use thiserror::Error;

/// Failures of a CLI command, grouped by the exit code they map to.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Image {
        path: PathBuf,
        source: image::ImageError,
    },
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] omniview::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } | CliError::Image { .. } => 3,
            CliError::Validation(_) | CliError::Core(_) => 4,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn invalid(path: &Path, msg: impl std::fmt::Display) -> Self {
        CliError::Validation(format!("{}: {msg}", path.display()))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
