use std::path::PathBuf;

use dsii_core::ErrorClass;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    /// Command-line parse failure.
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] dsii_core::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// One or more checks in `verify` failed.
    #[error("{0}")]
    Check(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) | CliError::Usage(_) => "validation",
            CliError::Core(e) => match e.class() {
                ErrorClass::Validation => "validation",
                ErrorClass::Numerical => "numerical",
            },
            CliError::Io { .. } => "io",
            CliError::Check(_) => "numerical",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "validation" => 1,
            "numerical" => 2,
            _ => 3,
        }
    }
}
