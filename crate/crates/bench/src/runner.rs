//! Executes benchmark runs on a worker pool and writes their outputs.

use std::fs;
use std::path::PathBuf;

use bocf::bo::{self, Method, RunTrace};
use bocf::problems::{self, CompositeProblem};
use rayon::prelude::*;
use serde::Serialize;

use crate::cli::RunRequest;
use crate::config::{replication_seed, BenchConfig};
use crate::error::BenchError;
use crate::output::{self, AggregateRow};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub manifest_version: u32,
    pub software: Software,
    pub config: &'a BenchConfig,
    pub problems: Vec<ProblemInfo>,
    pub runs: Vec<RunSummary>,
    /// Set when every aggregate row comes from a single replication, so its
    /// standard deviation and half-width are reported as 0.
    pub degenerate_statistics: bool,
    pub regret_files: Vec<String>,
    pub aggregate_file: String,
}

#[derive(Debug, Serialize)]
pub struct Software {
    pub name: &'static str,
    pub version: &'static str,
    pub regret_schema: String,
    pub aggregate_schema: String,
}

#[derive(Debug, Serialize)]
pub struct ProblemInfo {
    pub name: String,
    pub d: usize,
    pub m: usize,
    pub f_max_true: Option<f64>,
    pub x_ref: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub problem: String,
    pub method: Method,
    pub replication: usize,
    pub seed: u64,
    pub final_regret: f64,
    pub final_log10_regret: f64,
    pub h_evaluations: usize,
}

/// What a finished bench wrote.
#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub regret_files: Vec<PathBuf>,
    pub aggregate_file: PathBuf,
    pub manifest_file: PathBuf,
    pub aggregate: Vec<AggregateRow>,
    pub runs: Vec<RunSummary>,
}

struct Task<'a> {
    problem: &'a CompositeProblem,
    method: Method,
    replication: usize,
    seed: u64,
}

/// Runs every (problem, method, replication) triple and writes the per-run
/// CSVs, the aggregate CSV and the manifest into `cfg.out_dir`.
///
/// Runs may finish in any order; results are collected and written in
/// (problem, method, replication) order, so the files do not depend on
/// `cfg.jobs`.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchOutcome, BenchError> {
    cfg.validate()?;
    let problems = cfg.build_problems()?;
    for p in &problems {
        if p.f_max_true.is_none() {
            return Err(BenchError::Usage(format!("problem '{}' has no known optimum", p.name)));
        }
    }
    fs::create_dir_all(&cfg.out_dir).map_err(|source| BenchError::Io {
        path: cfg.out_dir.clone(),
        source,
    })?;

    let mut tasks = Vec::new();
    for problem in &problems {
        for &method in &cfg.methods {
            for replication in 0..cfg.replications {
                tasks.push(Task {
                    problem,
                    method,
                    replication,
                    seed: replication_seed(cfg.master_seed, &problem.name, replication),
                });
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| BenchError::Usage(format!("cannot start {} workers: {e}", cfg.jobs)))?;
    let results: Vec<Result<RunTrace, BenchError>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|t| {
                let trace = bo::run(t.problem, t.method, cfg.budget, t.seed, &cfg.bo).map_err(|source| {
                    BenchError::Run {
                        problem: t.problem.name.clone(),
                        method: t.method.name().to_string(),
                        replication: t.replication,
                        source,
                    }
                })?;
                log::info!(
                    "{}/{} rep {}: final regret {:e}",
                    t.problem.name,
                    t.method,
                    t.replication,
                    trace.final_record().regret
                );
                Ok(trace)
            })
            .collect()
    });
    let traces = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut regret_files = Vec::new();
    let mut aggregate = Vec::new();
    let mut runs = Vec::new();
    for (group, chunk) in traces.chunks(cfg.replications).enumerate() {
        let task = &tasks[group * cfg.replications];
        let name = &task.problem.name;
        let refs: Vec<&RunTrace> = chunk.iter().collect();
        regret_files.push(output::write_regret_csv(&cfg.out_dir, name, task.method, &refs, cfg.timing)?);
        aggregate.extend(output::aggregate(name, task.method, &refs));
        for (replication, trace) in chunk.iter().enumerate() {
            let regret = trace.final_record().regret;
            runs.push(RunSummary {
                problem: name.clone(),
                method: task.method,
                replication,
                seed: trace.seed,
                final_regret: regret,
                final_log10_regret: output::log10_regret(regret),
                h_evaluations: trace.h_evaluations,
            });
        }
    }
    let aggregate_file = output::write_aggregate_csv(&cfg.out_dir, &aggregate)?;

    let file_name = |p: &PathBuf| p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let manifest = Manifest {
        manifest_version: MANIFEST_VERSION,
        software: software(),
        config: cfg,
        problems: problems
            .iter()
            .map(|p| ProblemInfo {
                name: p.name.clone(),
                d: p.d(),
                m: p.m(),
                f_max_true: p.f_max_true,
                x_ref: p.x_ref.clone(),
            })
            .collect(),
        runs: runs.clone(),
        degenerate_statistics: cfg.replications == 1,
        regret_files: regret_files.iter().map(file_name).collect(),
        aggregate_file: file_name(&aggregate_file),
    };
    let manifest_file = output::write_manifest(&cfg.out_dir, &manifest)?;

    Ok(BenchOutcome {
        regret_files,
        aggregate_file,
        manifest_file,
        aggregate,
        runs,
    })
}

fn software() -> Software {
    Software {
        name: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        regret_schema: format!("{} v{}", output::REGRET_SCHEMA, output::SCHEMA_VERSION),
        aggregate_schema: format!("{} v{}", output::AGGREGATE_SCHEMA, output::SCHEMA_VERSION),
    }
}

/// Executes one run with the seed `bench` would give that replication.
pub fn run_single(req: &RunRequest) -> Result<RunTrace, BenchError> {
    let problem = problems::by_name(&req.problem).ok_or_else(|| BenchError::UnknownProblem(req.problem.clone()))?;
    let seed = replication_seed(req.master_seed, &req.problem, req.replication);
    bo::run(&problem, req.method, req.budget, seed, &req.bo).map_err(|source| BenchError::Run {
        problem: req.problem.clone(),
        method: req.method.name().to_string(),
        replication: req.replication,
        source,
    })
}
