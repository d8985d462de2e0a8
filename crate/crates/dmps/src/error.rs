use std::io;
use std::path::PathBuf;

use dmps_core::CoreError;

pub type DmpsResult<T> = Result<T, DmpsError>;

#[derive(Debug, thiserror::Error)]
pub enum DmpsError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("checkpoint not found: {}", .0.display())]
    MissingCheckpoint(PathBuf),
    #[error("invalid checkpoint {}: {msg}", path.display())]
    Checkpoint { path: PathBuf, msg: String },
    #[error("report input: {0}")]
    Report(String),
}

impl DmpsError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        DmpsError::Io { path: path.into(), source }
    }

    /// Process exit code. Usage errors exit with 2 (reported by the argument
    /// parser); every other failure class has its own code.
    pub fn exit_code(&self) -> i32 {
        match self {
            DmpsError::Config(_) | DmpsError::Core(CoreError::Config(_)) => exit::CONFIG,
            DmpsError::Io { .. } | DmpsError::Csv(_) => exit::IO,
            DmpsError::MissingCheckpoint(_) => exit::MISSING_CHECKPOINT,
            DmpsError::Checkpoint { .. } => exit::BAD_CHECKPOINT,
            DmpsError::Report(_) => exit::REPORT,
            DmpsError::Core(_) => exit::RUNTIME,
        }
    }
}

pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const CONFIG: i32 = 3;
    pub const IO: i32 = 4;
    pub const MISSING_CHECKPOINT: i32 = 5;
    pub const BAD_CHECKPOINT: i32 = 6;
    pub const RUNTIME: i32 = 7;
    pub const REPORT: i32 = 8;
}
