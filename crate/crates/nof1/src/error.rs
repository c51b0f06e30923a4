use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, bad files or violated preconditions.
    #[error("{0}")]
    Invalid(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}, line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error(transparent)]
    Core(#[from] nof1_core::Error),

    #[error("{count} fit(s) did not converge: {fits}")]
    NotConverged { count: usize, fits: String },

    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for validation problems, 3 for non-convergence under `--strict`,
    /// 1 for anything else.
    pub fn exit_code(&self) -> u8 {
        use nof1_core::Error as E;
        match self {
            CliError::Invalid(_) | CliError::Io { .. } | CliError::Parse { .. } => 2,
            CliError::NotConverged { .. } => 3,
            CliError::Core(e) => match e {
                E::NonFinite { .. } | E::SingularPrecision => 1,
                _ => 2,
            },
            CliError::Runtime(_) => 1,
        }
    }
}
