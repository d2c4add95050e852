use rayon::prelude::*;
use risas_core::benchmarks::{ao_solve, random_design, random_scheme_rate};
use risas_core::channel::generate_realization;
use risas_core::pdd::pdd_solve;
use risas_core::so::so_solve;
use risas_core::{ChannelRealization, SystemConfig};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentSpec, Scheme};
use crate::error::{HarnessError, Result};

/// One PDD outer iteration of one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub scheme: Scheme,
    pub seed: u64,
    pub outer_iter: usize,
    pub h: f64,
    pub rho: f64,
    /// Rate of the rounded (feasible) iterate.
    pub sum_rate: f64,
    pub relaxed_sum_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub sweep_value: String,
    pub scheme: Scheme,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeResult {
    pub scheme: Scheme,
    /// One entry per realization, `None` where the scheme failed.
    pub values: Vec<Option<f64>>,
    /// `None` when every realization failed.
    pub mean: Option<f64>,
    /// Sample standard deviation, 0 with fewer than two values.
    pub std: f64,
    /// Number of successful realizations.
    pub n: usize,
    pub failures: usize,
}

impl SchemeResult {
    pub fn from_values(scheme: Scheme, values: Vec<Option<f64>>) -> Self {
        let ok: Vec<f64> = values.iter().flatten().copied().collect();
        let (mean, std) = mean_std(&ok);
        let failures = values.len() - ok.len();
        SchemeResult {
            scheme,
            values,
            mean: (!ok.is_empty()).then_some(mean),
            std,
            n: ok.len(),
            failures,
        }
    }
}

/// Mean and sample standard deviation. The mean of an empty list is NaN.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub sweep_value: String,
    /// Channel digest per realization, shared by all schemes.
    pub channel_digests: Vec<Option<String>>,
    pub schemes: Vec<SchemeResult>,
    pub traces: Vec<TraceRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub sweep_var: String,
    /// Realization seeds in order; index `i` of every value list refers to
    /// `seeds[i]`.
    pub seeds: Vec<u64>,
    pub points: Vec<PointResult>,
    pub failures: Vec<SeedFailure>,
}

impl ExperimentResult {
    pub fn empty(sweep_var: &str) -> Self {
        ExperimentResult {
            sweep_var: sweep_var.to_string(),
            seeds: vec![],
            points: vec![],
            failures: vec![],
        }
    }

    pub fn scheme(&self, point: usize, scheme: Scheme) -> Option<&SchemeResult> {
        self.points
            .get(point)?
            .schemes
            .iter()
            .find(|s| s.scheme == scheme)
    }
}

struct TaskOutput {
    digest: Option<String>,
    rates: Vec<std::result::Result<f64, String>>,
    traces: Vec<TraceRow>,
}

fn run_scheme(
    scheme: Scheme,
    spec: &ExperimentSpec,
    channels: &ChannelRealization,
    config: &SystemConfig,
    seed: u64,
    traces: &mut Vec<TraceRow>,
) -> Result<f64> {
    let rate = match scheme {
        Scheme::Pdd => {
            let (design, diag) = pdd_solve(channels, config, &spec.pdd, seed)?;
            if spec.trace {
                traces.extend(diag.outer.iter().map(|r| TraceRow {
                    scheme,
                    seed,
                    outer_iter: r.iter,
                    h: r.h,
                    rho: r.rho,
                    sum_rate: r.rounded_sum_rate,
                    relaxed_sum_rate: r.relaxed_sum_rate,
                }));
            }
            design.sum_rate(channels, config)?
        }
        Scheme::So => so_solve(channels, config, &spec.so, seed)?.sum_rate(channels, config)?,
        Scheme::Ao => ao_solve(channels, config, &spec.ao, seed)?
            .0
            .sum_rate(channels, config)?,
        Scheme::Random => {
            random_scheme_rate(&random_design(channels, config, seed)?, channels, config)?
        }
    };
    if !rate.is_finite() {
        return Err(HarnessError::Core(risas_core::Error::Numerical(format!(
            "non-finite sum-rate {rate}"
        ))));
    }
    Ok(rate)
}

fn run_task(spec: &ExperimentSpec, config: &SystemConfig, seed: u64) -> TaskOutput {
    let mut traces = Vec::new();
    let channels = match generate_realization(config, &spec.fading, seed) {
        Ok(c) => c,
        Err(e) => {
            let msg = format!("channel generation: {e}");
            return TaskOutput {
                digest: None,
                rates: spec.schemes.iter().map(|_| Err(msg.clone())).collect(),
                traces,
            };
        }
    };
    let rates = spec
        .schemes
        .iter()
        .map(|&scheme| {
            run_scheme(scheme, spec, &channels, config, seed, &mut traces)
                .map_err(|e| e.to_string())
        })
        .collect();
    TaskOutput {
        digest: Some(channels.digest()),
        rates,
        traces,
    }
}

/// Runs every scheme on every (sweep point, realization) pair. Realization
/// `i` uses seed `seed0 + i` for both channels and solver initialization, so
/// schemes are compared on identical channels. Work is spread over the
/// current rayon pool; results are collected in seed order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let points = spec.sweep.points(&spec.base);
    let seeds: Vec<u64> = (0..spec.n_realizations as u64)
        .map(|i| spec.seed0.wrapping_add(i))
        .collect();
    let tasks: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|p| seeds.iter().map(move |&s| (p, s)))
        .collect();

    let outputs: Vec<TaskOutput> = tasks
        .par_iter()
        .map(|&(p, seed)| {
            log::debug!("{} = {}, seed {seed}", spec.sweep.variable(), points[p].0);
            run_task(spec, &points[p].1, seed)
        })
        .collect();

    let mut result = ExperimentResult::empty(spec.sweep.variable());
    result.seeds = seeds.clone();
    let mut outputs = outputs.into_iter();
    for (label, _) in &points {
        let chunk: Vec<TaskOutput> = outputs.by_ref().take(seeds.len()).collect();
        let mut schemes = Vec::with_capacity(spec.schemes.len());
        for (j, &scheme) in spec.schemes.iter().enumerate() {
            let mut values = Vec::with_capacity(seeds.len());
            for (out, &seed) in chunk.iter().zip(&seeds) {
                match &out.rates[j] {
                    Ok(r) => values.push(Some(*r)),
                    Err(message) => {
                        result.failures.push(SeedFailure {
                            sweep_value: label.clone(),
                            scheme,
                            seed,
                            message: message.clone(),
                        });
                        values.push(None);
                    }
                }
            }
            schemes.push(SchemeResult::from_values(scheme, values));
        }
        let mut traces: Vec<TraceRow> = Vec::new();
        let mut digests = Vec::with_capacity(seeds.len());
        for out in chunk {
            traces.extend(out.traces);
            digests.push(out.digest);
        }
        log::info!("{} = {label}: done", spec.sweep.variable());
        result.points.push(PointResult {
            sweep_value: label.clone(),
            channel_digests: digests,
            schemes,
            traces,
        });
    }
    Ok(result)
}
