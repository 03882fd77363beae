//! Tuning harness around the `carbs` optimizer: config loading, parallel
//! evaluation workers over a file-based subprocess protocol, run-directory
//! persistence and resume, a synthetic benchmark suite, and report emission.

pub mod bench;
pub mod config;
pub mod problems;
pub mod report;
pub mod runner;
pub mod tuner;
pub mod worker;

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config error: {0}")]
    Config(String),
    #[error("malformed observation log at line {line}: {reason}")]
    BadLog { line: usize, reason: String },
    #[error(transparent)]
    Optimizer(#[from] carbs::ConfigError),
    #[error(transparent)]
    Observe(#[from] carbs::ObserveError),
    #[error(transparent)]
    Snapshot(#[from] carbs::SnapshotError),
    #[error(transparent)]
    Space(#[from] carbs::SpaceError),
    #[error("unknown benchmark problem `{0}`")]
    UnknownProblem(String),
    #[error("unknown tuner `{0}` (expected `carbs` or `random`)")]
    UnknownTuner(String),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
