//! CSV and manifest writers.
//!
//! Both CSV kinds start with a `#` comment line naming the schema and its
//! version, followed by a header row. Floats use Rust's shortest round-trip
//! formatting, so identical runs give identical bytes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use bocf::bo::{Method, RunTrace};
use serde::Serialize;

use crate::error::BenchError;

pub const REGRET_SCHEMA: &str = "bocf-regret";
pub const AGGREGATE_SCHEMA: &str = "bocf-aggregate";
pub const SCHEMA_VERSION: u32 = 1;
/// Regrets are clamped to this before taking log10.
pub const REGRET_FLOOR: f64 = 1e-12;
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub const REGRET_COLUMNS: [&str; 9] = [
    "problem",
    "method",
    "replication",
    "iteration",
    "incumbent_f",
    "recommended_f",
    "regret",
    "log10_regret",
    "wall_ms",
];

pub const AGGREGATE_COLUMNS: [&str; 7] = [
    "problem",
    "method",
    "iteration",
    "reps",
    "mean_log10_regret",
    "sd_log10_regret",
    "half_width",
];

pub fn log10_regret(regret: f64) -> f64 {
    regret.max(REGRET_FLOOR).log10()
}

/// File name of the per-run CSV for one (problem, method) pair.
pub fn regret_file_name(problem: &str, method: Method) -> String {
    format!("{problem}__{}.csv", method.name())
}

/// Per-iteration statistics of log10 regret across replications.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub problem: String,
    pub method: Method,
    pub iteration: usize,
    pub reps: usize,
    pub mean_log10_regret: f64,
    /// Sample standard deviation; 0 for a single replication.
    pub sd_log10_regret: f64,
    /// `1.96 · sd / √reps`.
    pub half_width: f64,
}

/// Aggregates the traces of one (problem, method) pair, all with the same
/// budget.
pub fn aggregate(problem: &str, method: Method, traces: &[&RunTrace]) -> Vec<AggregateRow> {
    let iterations = traces.iter().map(|t| t.records.len()).min().unwrap_or(0);
    (0..iterations)
        .map(|it| {
            let values: Vec<f64> = traces.iter().map(|t| log10_regret(t.records[it].regret)).collect();
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            let sd = if n > 1 {
                (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            AggregateRow {
                problem: problem.to_string(),
                method,
                iteration: it,
                reps: n,
                mean_log10_regret: mean,
                sd_log10_regret: sd,
                half_width: 1.96 * sd / (n as f64).sqrt(),
            }
        })
        .collect()
}

fn schema_line(schema: &str) -> String {
    format!("# {schema} v{SCHEMA_VERSION}\n")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_bytes(schema: &str, columns: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>, BenchError> {
    let mut buf = schema_line(schema).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(columns)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush().map_err(csv::Error::from)?;
    }
    Ok(buf)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), BenchError> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(bytes).map_err(io_err(path))
}

/// Writes the per-run CSV of one (problem, method) pair; `traces` are in
/// replication order.
pub fn write_regret_csv(
    dir: &Path,
    problem: &str,
    method: Method,
    traces: &[&RunTrace],
    timing: bool,
) -> Result<PathBuf, BenchError> {
    let mut rows = Vec::new();
    for (rep, trace) in traces.iter().enumerate() {
        for r in &trace.records {
            rows.push(vec![
                problem.to_string(),
                method.name().to_string(),
                rep.to_string(),
                r.iteration.to_string(),
                r.incumbent_f.to_string(),
                r.f_rec.to_string(),
                r.regret.to_string(),
                log10_regret(r.regret).to_string(),
                if timing { r.wall_ms.to_string() } else { String::new() },
            ]);
        }
    }
    let path = dir.join(regret_file_name(problem, method));
    write_file(&path, &csv_bytes(REGRET_SCHEMA, &REGRET_COLUMNS, rows)?)?;
    Ok(path)
}

pub fn write_aggregate_csv(dir: &Path, rows: &[AggregateRow]) -> Result<PathBuf, BenchError> {
    let rows = rows
        .iter()
        .map(|r| {
            vec![
                r.problem.clone(),
                r.method.name().to_string(),
                r.iteration.to_string(),
                r.reps.to_string(),
                r.mean_log10_regret.to_string(),
                r.sd_log10_regret.to_string(),
                r.half_width.to_string(),
            ]
        })
        .collect();
    let path = dir.join(AGGREGATE_FILE);
    write_file(&path, &csv_bytes(AGGREGATE_SCHEMA, &AGGREGATE_COLUMNS, rows)?)?;
    Ok(path)
}

pub fn write_manifest<T: Serialize>(dir: &Path, manifest: &T) -> Result<PathBuf, BenchError> {
    let path = dir.join(MANIFEST_FILE);
    let mut bytes = serde_json::to_vec_pretty(manifest)?;
    bytes.push(b'\n');
    write_file(&path, &bytes)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use bocf::bo::{BoConfig, IterationRecord};

    fn trace(regrets: &[f64]) -> RunTrace {
        RunTrace {
            method: Method::Random,
            problem: "p".into(),
            seed: 0,
            budget: regrets.len() - 1,
            config: BoConfig::default(),
            initial_design: vec![],
            records: regrets
                .iter()
                .enumerate()
                .map(|(i, r)| IterationRecord {
                    iteration: i,
                    x: None,
                    h: None,
                    f: None,
                    incumbent_f: 0.0,
                    x_rec: vec![],
                    f_rec: -r,
                    regret: *r,
                    wall_ms: 1.5,
                })
                .collect(),
            h_evaluations: 0,
            final_hyperparams: vec![],
        }
    }

    #[test]
    fn log_regret_is_floored() {
        assert_eq!(log10_regret(0.0), -12.0);
        assert_eq!(log10_regret(-1e-10), -12.0);
        assert_eq!(log10_regret(100.0), 2.0);
    }

    #[test]
    fn aggregate_statistics() {
        let a = trace(&[10.0, 1.0]);
        let b = trace(&[1000.0, 0.01]);
        let rows = aggregate("p", Method::Random, &[&a, &b]);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].mean_log10_regret, 2.0);
        let sd = 2f64.sqrt();
        assert!((rows[0].sd_log10_regret - sd).abs() < 1e-15);
        assert!((rows[0].half_width - 1.96 * sd / 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(rows[1].mean_log10_regret, -1.0);
    }

    #[test]
    fn single_replication_has_zero_width() {
        let a = trace(&[10.0, 1.0, 0.1]);
        let rows = aggregate("p", Method::Random, &[&a]);
        assert!(rows.iter().all(|r| r.half_width == 0.0 && r.sd_log10_regret == 0.0));
    }

    #[test]
    fn regret_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let a = trace(&[10.0, 1.0]);
        let path = write_regret_csv(dir.path(), "p", Method::Random, &[&a, &a], false).unwrap();
        let text = fs::read_to_string(path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# bocf-regret v1");
        assert_eq!(lines[1], REGRET_COLUMNS.join(","));
        assert_eq!(lines.len(), 2 + 4);
        assert_eq!(lines[3], "p,random,0,1,0,-1,1,0,");
    }
}
