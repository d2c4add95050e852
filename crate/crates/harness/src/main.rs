use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use risas_core::channel::{generate_realization, write_channels};
use risas_harness::{
    emit_results, run_experiment, ExperimentSpec, HarnessError, OutputFormat, Overrides, Scheme,
    SweepKind,
};

/// Monte Carlo comparison of joint antenna selection, RIS phase and
/// precoding designs.
#[derive(Debug, Parser)]
#[command(name = "risas", version)]
struct Cli {
    /// TOML experiment specification; defaults to the reference setup.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated subset of pdd,so,ao,random.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<Scheme>>,
    /// Number of channel realizations per sweep point.
    #[arg(long)]
    realizations: Option<usize>,
    /// First realization seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Sweep variable: power, qbits or rf.
    #[arg(long)]
    sweep: Option<SweepKind>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
    /// Record PDD convergence traces.
    #[arg(long)]
    trace: bool,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Also write the base-configuration channel realizations as JSON lines.
    #[arg(long, value_name = "PATH")]
    dump_channels: Option<PathBuf>,
}

fn dump_channels(spec: &ExperimentSpec, path: &PathBuf) -> Result<(), HarnessError> {
    let channels = (0..spec.n_realizations as u64)
        .map(|i| generate_realization(&spec.base, &spec.fading, spec.seed0.wrapping_add(i)))
        .collect::<Result<Vec<_>, _>>()?;
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    write_channels(BufWriter::new(file), &channels).map_err(|e| HarnessError::io(path, e))
}

fn run(cli: &Cli) -> Result<usize, HarnessError> {
    let overrides = Overrides {
        schemes: cli.schemes.clone(),
        n_realizations: cli.realizations,
        seed0: cli.seed,
        sweep: cli.sweep,
        trace: cli.trace,
    };
    let spec = match &cli.config {
        Some(path) => ExperimentSpec::from_path(path, &overrides)?,
        None => ExperimentSpec::from_toml_with("", &overrides)?,
    };
    spec.validate()?;
    if let Some(path) = &cli.dump_channels {
        dump_channels(&spec, path)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    let result = pool.install(|| run_experiment(&spec))?;
    for path in emit_results(&result, cli.format, &cli.out)? {
        log::info!("wrote {}", path.display());
    }
    for f in &result.failures {
        eprintln!(
            "failed: {}={} scheme={} seed={}: {}",
            result.sweep_var, f.sweep_value, f.scheme, f.seed, f.message
        );
    }
    Ok(result.failures.len())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            eprintln!("{n} scheme runs failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
