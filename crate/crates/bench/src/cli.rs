//! Command-line parsing.
//!
//! ```text
//! bocf bench --problem rosenbrock5 --method ei_cf,ei --reps 10 --budget 40 --seed 1 --out results/
//! bocf run --problem environmental --method ei_cf --budget 30
//! bocf list-problems
//! ```

use std::ffi::OsString;
use std::path::PathBuf;

use bocf::bo::{BoConfig, Method};
use clap::{Args, Parser, Subcommand};

use crate::config::{parse_methods, parse_problems, BenchConfig};
use crate::error::BenchError;

#[derive(Debug, Parser)]
#[command(name = "bocf", version, about = "Bayesian optimization of composite functions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replicated runs with CSV and manifest output.
    Bench(BenchArgs),
    /// One run; prints its trace as JSON.
    Run(RunArgs),
    /// Prints the problem catalog.
    ListProblems,
}

#[derive(Debug, Args)]
pub struct LoopArgs {
    /// Evaluations after the initial design.
    #[arg(long, default_value_t = 40)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Monte Carlo draws for recommendations and for ranking SGA candidates.
    #[arg(long, default_value_t = 4096)]
    pub mc_samples: usize,
    /// GP hyperparameter samples averaged over by the acquisitions.
    #[arg(long, default_value_t = 10)]
    pub hyper_samples: usize,
}

impl LoopArgs {
    fn bo_config(&self) -> BoConfig {
        let mut bo = BoConfig {
            ensemble_size: self.hyper_samples,
            recommend_samples: self.mc_samples,
            ..BoConfig::default()
        };
        bo.sga.final_ranking_samples = self.mc_samples;
        bo
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated problem names.
    #[arg(long)]
    pub problem: String,
    /// Comma-separated method names.
    #[arg(long, default_value = "ei_cf,pi_cf,random_cf,ei,pi,random")]
    pub method: String,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Record wall-clock milliseconds in the per-run CSVs.
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub common: LoopArgs,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub problem: String,
    #[arg(long, default_value = "ei_cf")]
    pub method: String,
    /// Replication index; the run matches that replication of `bench`.
    #[arg(long, default_value_t = 0)]
    pub replication: usize,
    #[command(flatten)]
    pub common: LoopArgs,
}

/// A single resolved run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRequest {
    pub problem: String,
    pub method: Method,
    pub budget: usize,
    pub master_seed: u64,
    pub replication: usize,
    pub bo: BoConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Bench(BenchConfig),
    Run(RunRequest),
    ListProblems,
}

impl Command {
    /// Resolves names and defaults into an [`Action`].
    pub fn resolve(self) -> Result<Action, BenchError> {
        match self {
            Command::Bench(a) => {
                let jobs = a
                    .jobs
                    .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
                let cfg = BenchConfig {
                    problems: parse_problems(&a.problem)?,
                    methods: parse_methods(&a.method)?,
                    replications: a.reps,
                    budget: a.common.budget,
                    master_seed: a.common.seed,
                    bo: a.common.bo_config(),
                    out_dir: a.out,
                    jobs,
                    timing: a.timing,
                };
                cfg.validate()?;
                Ok(Action::Bench(cfg))
            }
            Command::Run(a) => {
                let problem = match parse_problems(&a.problem)?.as_slice() {
                    [one] => one.clone(),
                    _ => return Err(BenchError::Usage("`run` takes exactly one problem".into())),
                };
                let method = match parse_methods(&a.method)?.as_slice() {
                    [one] => *one,
                    _ => return Err(BenchError::Usage("`run` takes exactly one method".into())),
                };
                let bo = a.common.bo_config();
                if bo.ensemble_size == 0 || bo.recommend_samples == 0 {
                    return Err(BenchError::Usage(
                        "--hyper-samples and --mc-samples must be at least 1".into(),
                    ));
                }
                Ok(Action::Run(RunRequest {
                    problem,
                    method,
                    budget: a.common.budget,
                    master_seed: a.common.seed,
                    replication: a.replication,
                    bo,
                }))
            }
            Command::ListProblems => Ok(Action::ListProblems),
        }
    }
}

/// Parses and resolves `argv` (including the program name). Clap errors,
/// including `--help`, come back as `Err(clap::Error)` in the outer result.
pub fn parse<I, T>(argv: I) -> Result<Result<Action, BenchError>, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    Cli::try_parse_from(argv).map(|cli| cli.command.resolve())
}
