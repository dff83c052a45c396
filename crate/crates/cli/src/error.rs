use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("writing output: {0}")]
    Output(#[from] std::io::Error),

    #[error(transparent)]
    Numerical(#[from] nhtopo::Error),
}

impl CliError {
    /// 0 success, 1 usage or parse, 2 numerical, 3 no admissible metric.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Numerical(nhtopo::Error::NotThermalizable(_)) => 3,
            Self::Numerical(nhtopo::Error::InvalidParams(_) | nhtopo::Error::DimensionMismatch(_)) => 1,
            Self::Numerical(_) => 2,
            Self::Usage(_) | Self::Parse { .. } | Self::Io { .. } | Self::Output(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
