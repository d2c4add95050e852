use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::Scheme;
use crate::error::{HarnessError, Result};
use crate::run::{ExperimentResult, TraceRow};

pub const PER_SEED_FILE: &str = "per_seed.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const JSON_FILE: &str = "results.json";

const PER_SEED_HEADER: [&str; 5] = [
    "sweep_var",
    "sweep_value",
    "scheme",
    "seed",
    "sum_rate_bpshz",
];
const AGGREGATE_HEADER: [&str; 6] = ["sweep_var", "sweep_value", "scheme", "mean", "std", "n"];
const TRACE_HEADER: [&str; 7] = [
    "scheme",
    "seed",
    "outer_iter",
    "h",
    "rho",
    "sum_rate",
    "relaxed_sum_rate",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(HarnessError::Config(format!(
                "unknown format '{s}' (expected csv or json)"
            ))),
        }
    }
}

/// Writes the result into directory `dir`, creating it if needed, and
/// returns the files written.
///
/// CSV output is `per_seed.csv`, `aggregate.csv` and, when traces were
/// recorded, one trace file per sweep point (`traces.csv` without a sweep,
/// `traces_<var>_<value>.csv` otherwise). JSON output is a single
/// `results.json`. Floats use the shortest representation that parses back
/// to the same value, so output bytes depend only on the result.
pub fn emit_results(
    result: &ExperimentResult,
    format: OutputFormat,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    match format {
        OutputFormat::Json => {
            let path = dir.join(JSON_FILE);
            let file = File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
            let mut w = BufWriter::new(file);
            serde_json::to_writer_pretty(&mut w, result)
                .map_err(|e| HarnessError::format(&path, e))?;
            w.write_all(b"\n")
                .and_then(|_| w.flush())
                .map_err(|e| HarnessError::io(&path, e))?;
            Ok(vec![path])
        }
        OutputFormat::Csv => {
            let mut written = vec![write_per_seed(result, dir)?, write_aggregate(result, dir)?];
            for point in &result.points {
                if point.traces.is_empty() {
                    continue;
                }
                let name = if result.sweep_var == "none" {
                    "traces.csv".to_string()
                } else {
                    format!("traces_{}_{}.csv", result.sweep_var, point.sweep_value)
                };
                let path = dir.join(name);
                write_traces(&point.traces, &path)?;
                written.push(path);
            }
            Ok(written)
        }
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> HarnessError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => HarnessError::io(path, io),
        other => HarnessError::format(path, format!("{other:?}")),
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn write_per_seed(result: &ExperimentResult, dir: &Path) -> Result<PathBuf> {
    let path = dir.join(PER_SEED_FILE);
    let mut w = csv_writer(&path)?;
    let mut body = || -> csv::Result<()> {
        w.write_record(PER_SEED_HEADER)?;
        for point in &result.points {
            for s in &point.schemes {
                for (seed, v) in result.seeds.iter().zip(&s.values) {
                    w.write_record([
                        result.sweep_var.as_str(),
                        &point.sweep_value,
                        s.scheme.name(),
                        &seed.to_string(),
                        &opt(*v),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    };
    body().map_err(|e| csv_error(&path, e))?;
    Ok(path)
}

fn write_aggregate(result: &ExperimentResult, dir: &Path) -> Result<PathBuf> {
    let path = dir.join(AGGREGATE_FILE);
    let mut w = csv_writer(&path)?;
    let mut body = || -> csv::Result<()> {
        w.write_record(AGGREGATE_HEADER)?;
        for point in &result.points {
            for s in &point.schemes {
                w.write_record([
                    result.sweep_var.as_str(),
                    &point.sweep_value,
                    s.scheme.name(),
                    &opt(s.mean),
                    &s.std.to_string(),
                    &s.n.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    };
    body().map_err(|e| csv_error(&path, e))?;
    Ok(path)
}

fn write_traces(rows: &[TraceRow], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut body = || -> csv::Result<()> {
        w.write_record(TRACE_HEADER)?;
        for r in rows {
            w.write_record([
                r.scheme.name(),
                &r.seed.to_string(),
                &r.outer_iter.to_string(),
                &r.h.to_string(),
                &r.rho.to_string(),
                &r.sum_rate.to_string(),
                &r.relaxed_sum_rate.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    };
    body().map_err(|e| csv_error(path, e))
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct PerSeedRow {
    pub sweep_var: String,
    pub sweep_value: String,
    pub scheme: Scheme,
    pub seed: u64,
    pub sum_rate_bpshz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct AggregateRow {
    pub sweep_var: String,
    pub sweep_value: String,
    pub scheme: Scheme,
    pub mean: Option<f64>,
    pub std: f64,
    pub n: usize,
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize()
        .collect::<csv::Result<Vec<T>>>()
        .map_err(|e| csv_error(path, e))
}

pub fn read_per_seed(path: &Path) -> Result<Vec<PerSeedRow>> {
    read_rows(path)
}

pub fn read_aggregate(path: &Path) -> Result<Vec<AggregateRow>> {
    read_rows(path)
}

pub fn read_json(path: &Path) -> Result<ExperimentResult> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::format(path, e))
}
