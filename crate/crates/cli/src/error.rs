use std::path::PathBuf;

use ehdwaves_core::WaveError;
use thiserror::Error;

use crate::config::ConfigIssue;

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const NO_EVENT: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration:\n{}", render(.0))]
    Config(Vec<ConfigIssue>),

    #[error("numerical failure: {0}")]
    Numerical(#[from] WaveError),

    /// The run finished but wrote a partial result.
    #[error("numerical failure: {reason} (partial dataset in {})", dir.display())]
    Truncated { reason: String, dir: PathBuf },

    #[error("no singularity event found (dataset in {})", dir.display())]
    NoEvent { dir: PathBuf },

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: malformed dataset: {reason}", path.display())]
    Dataset { path: PathBuf, reason: String },

    #[error("{0}")]
    Other(String),
}

fn render(issues: &[ConfigIssue]) -> String {
    issues.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n")
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Numerical(_) | CliError::Truncated { .. } => exit::NUMERICAL,
            CliError::NoEvent { .. } => exit::NO_EVENT,
            CliError::Io { .. } | CliError::Dataset { .. } | CliError::Other(_) => exit::OTHER,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}
