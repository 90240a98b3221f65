use std::path::PathBuf;

use thiserror::Error;

use crate::report::ArmSummary;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] rehmc_core::Error),
    #[error("arm `{arm}` diverged in {:.1}% of iterations (limit {:.1}%)", rate * 100.0, limit * 100.0)]
    Divergence {
        arm: String,
        rate: f64,
        limit: f64,
        /// Summaries of every arm run before the abort, the failing one last.
        arms: Vec<ArmSummary>,
    },
}

impl BenchError {
    /// Process exit code: 2 for configuration and input problems, 3 for
    /// numerical failure, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) | BenchError::Data { .. } => 2,
            BenchError::Core(rehmc_core::Error::InvalidParameter(_)) => 2,
            BenchError::Divergence { .. } => 3,
            BenchError::Io { .. } | BenchError::Core(_) => 1,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        BenchError::Config(msg.into())
    }
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;
