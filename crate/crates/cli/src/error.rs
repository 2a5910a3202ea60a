use std::io;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, bad config, missing inputs.
    #[error("{0}")]
    Usage(String),
    /// Training, numerical or verification failure.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn write(path: &Path, e: io::Error) -> Self {
        CliError::Runtime(format!("cannot write {}: {e}", path.display()))
    }
}

impl From<gcllab::Error> for CliError {
    fn from(e: gcllab::Error) -> Self {
        use gcllab::Error as E;
        match e {
            E::Config(_) | E::Parse { .. } | E::Json(_) | E::Precondition(_) => {
                CliError::Usage(e.to_string())
            }
            E::Io { ref source, .. } if source.kind() == io::ErrorKind::NotFound => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

/// Fails with a usage error when an input file is missing.
pub fn require_file(path: &Path) -> Result<PathBuf, CliError> {
    if path.is_file() {
        Ok(path.to_path_buf())
    } else {
        Err(CliError::Usage(format!("no such file: {}", path.display())))
    }
}
