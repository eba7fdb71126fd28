use std::io::Write;
use std::process::ExitCode;

use bocf::problems;
use bocf_bench::cli::{self, Action};
use bocf_bench::runner;
use bocf_bench::BenchError;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let action = match cli::parse(std::env::args_os()) {
        Ok(a) => a,
        Err(e) => e.exit(),
    };
    match action.and_then(execute) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(action: Action) -> Result<(), BenchError> {
    let stdout = std::io::stdout();
    let io = |source| BenchError::Io {
        path: "<stdout>".into(),
        source,
    };
    match action {
        Action::ListProblems => {
            let mut out = stdout.lock();
            for name in problems::PROBLEM_NAMES {
                let p = problems::by_name(name).ok_or_else(|| BenchError::UnknownProblem(name.into()))?;
                writeln!(out, "{name}\td={}\tm={}\tf_max={:?}", p.d(), p.m(), p.f_max_true).map_err(io)?;
            }
        }
        Action::Run(req) => {
            let trace = runner::run_single(&req)?;
            let mut out = stdout.lock();
            serde_json::to_writer_pretty(&mut out, &trace)?;
            writeln!(out).map_err(io)?;
        }
        Action::Bench(cfg) => {
            let outcome = runner::run_bench(&cfg)?;
            println!(
                "wrote {} regret files, {} and {}",
                outcome.regret_files.len(),
                outcome.aggregate_file.display(),
                outcome.manifest_file.display()
            );
        }
    }
    Ok(())
}
