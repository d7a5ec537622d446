use std::path::PathBuf;

use lrp_core::Error as CoreError;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const PRECONDITION: i32 = 3;
    pub const VIOLATED: i32 = 4;
    pub const INTERNAL: i32 = 5;
}

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),
    #[error("precondition error: {0}")]
    Precondition(String),
    #[error("{0}")]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("internal error: {0}")]
    Internal(String),
}

impl LabError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => exit::CONFIG,
            Self::Precondition(_) => exit::PRECONDITION,
            Self::Core(e) => match e {
                CoreError::InvalidSpec(_) | CoreError::InfiniteCriticalPoint { .. } => exit::CONFIG,
                _ => exit::PRECONDITION,
            },
            Self::Io { .. } | Self::Internal(_) => exit::INTERNAL,
        }
    }
}

pub type LabResult<T> = Result<T, LabError>;
