use std::path::PathBuf;

use thiserror::Error;

/// Failure of a command, carrying its process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] tierflow::Error),

    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 configuration, 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> u8 {
        use tierflow::Error as E;
        match self {
            CliError::Config(_) => 1,
            CliError::Core(E::Config(_) | E::Json(_)) => 1,
            CliError::Core(E::Numeric(_)) => 3,
            CliError::Core(_) | CliError::Output { .. } => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
