use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown problem '{0}' (see `bocf list-problems`)")]
    UnknownProblem(String),
    #[error("unknown method '{0}' (expected one of ei_cf, pi_cf, random_cf, ei, pi, random)")]
    UnknownMethod(String),
    #[error("invalid configuration: {0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{problem}/{method} replication {replication}: {source}")]
    Run {
        problem: String,
        method: String,
        replication: usize,
        source: bocf::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl BenchError {
    /// Process exit status: 2 for usage errors, 1 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::UnknownProblem(_) | BenchError::UnknownMethod(_) | BenchError::Usage(_) => 2,
            _ => 1,
        }
    }
}
