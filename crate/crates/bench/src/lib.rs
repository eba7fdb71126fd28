//! Replicated benchmark runs with CSV and JSON output.
//!
//! [`cli`] parses arguments into a [`BenchConfig`], [`runner::run_bench`]
//! executes every (problem, method, replication) triple on a worker pool, and
//! [`output`] writes the per-run CSVs, the aggregate CSV and the manifest.

pub mod cli;
pub mod config;
pub mod error;
pub mod output;
pub mod runner;

pub use config::BenchConfig;
pub use error::BenchError;
