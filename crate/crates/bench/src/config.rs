//! Resolved benchmark configuration and per-run seed derivation.

use std::path::PathBuf;

use bocf::bo::{BoConfig, Method};
use bocf::noise::derive_seed;
use bocf::problems::{self, CompositeProblem};
use serde::Serialize;

use crate::error::BenchError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchConfig {
    pub problems: Vec<String>,
    pub methods: Vec<Method>,
    pub replications: usize,
    /// Evaluations after the initial design.
    pub budget: usize,
    pub master_seed: u64,
    pub bo: BoConfig,
    #[serde(skip)]
    pub out_dir: PathBuf,
    /// Worker threads. Has no effect on the outputs.
    #[serde(skip)]
    pub jobs: usize,
    /// Record wall-clock times. Off by default so that outputs are
    /// reproducible byte for byte.
    pub timing: bool,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.replications == 0 {
            return Err(BenchError::Usage("--reps must be at least 1".into()));
        }
        if self.problems.is_empty() || self.methods.is_empty() {
            return Err(BenchError::Usage("need at least one problem and one method".into()));
        }
        if self.jobs == 0 {
            return Err(BenchError::Usage("--jobs must be at least 1".into()));
        }
        if self.bo.ensemble_size == 0 || self.bo.recommend_samples == 0 {
            return Err(BenchError::Usage(
                "--hyper-samples and --mc-samples must be at least 1".into(),
            ));
        }
        for p in &self.problems {
            if !problems::PROBLEM_NAMES.contains(&p.as_str()) {
                return Err(BenchError::UnknownProblem(p.clone()));
            }
        }
        Ok(())
    }

    /// Builds every configured problem once.
    pub fn build_problems(&self) -> Result<Vec<CompositeProblem>, BenchError> {
        self.problems
            .iter()
            .map(|name| problems::by_name(name).ok_or_else(|| BenchError::UnknownProblem(name.clone())))
            .collect()
    }
}

/// Parses a comma-separated method list.
pub fn parse_methods(list: &str) -> Result<Vec<Method>, BenchError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| BenchError::UnknownMethod(s.to_string())))
        .collect()
}

/// Parses a comma-separated problem list, checking each name.
pub fn parse_problems(list: &str) -> Result<Vec<String>, BenchError> {
    let names: Vec<String> = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect();
    for n in &names {
        if !problems::PROBLEM_NAMES.contains(&n.as_str()) {
            return Err(BenchError::UnknownProblem(n.clone()));
        }
    }
    Ok(names)
}

/// Seed of replication `replication` on `problem`.
///
/// The seed does not depend on the method: the loop derives the initial
/// design from it directly (so methods share designs) and every other stream
/// from it combined with the method name.
pub fn replication_seed(master_seed: u64, problem: &str, replication: usize) -> u64 {
    derive_seed(master_seed, &[problem, &replication.to_string()])
}
