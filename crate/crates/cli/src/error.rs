use std::path::PathBuf;

use thiserror::Error;

/// Exit status of the `sga` binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Success = 0,
    /// An `oracle-check` row left its tolerance.
    CheckFailed = 1,
    Config = 2,
    Divergence = 3,
    Io = 4,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("cannot read {path}: {reason}")]
    UnreadableFile { path: PathBuf, reason: String },
    #[error("{path}: not a field file or image (bad magic)")]
    BadMagic { path: PathBuf },
    #[error("{path}: malformed field header: {reason}")]
    BadHeader { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    BadInput { path: PathBuf, source: sga_core::Error },
    #[error("visual export needs a 2D or 3D field, got d={0}")]
    UnsupportedDim(usize),
    #[error("cannot write {path}: {reason}")]
    Write { path: PathBuf, reason: String },
    #[error(transparent)]
    Solver(#[from] sga_core::Error),
    #[error("{failed} oracle check(s) out of tolerance")]
    CheckFailed { failed: usize },
}

impl CliError {
    pub fn exit_kind(&self) -> ExitKind {
        use sga_core::Error as E;
        match self {
            CliError::Config(_) => ExitKind::Config,
            CliError::UnreadableFile { .. }
            | CliError::BadMagic { .. }
            | CliError::BadHeader { .. }
            | CliError::BadInput { .. }
            | CliError::Write { .. } => ExitKind::Io,
            CliError::UnsupportedDim(_) => ExitKind::Config,
            CliError::CheckFailed { .. } => ExitKind::CheckFailed,
            CliError::Solver(E::NonFiniteIterate { .. } | E::MonotonicityViolated { .. }) => ExitKind::Divergence,
            CliError::Solver(_) => ExitKind::Config,
        }
    }

    pub(crate) fn write(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Write { path: path.to_path_buf(), reason: e.to_string() }
    }

    pub(crate) fn read(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::UnreadableFile { path: path.to_path_buf(), reason: e.to_string() }
    }
}

pub type CliResult<T> = Result<T, CliError>;
