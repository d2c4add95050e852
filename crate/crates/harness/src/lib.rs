//! Monte Carlo driver: parses experiment specifications, runs every scheme
//! on paired channel realizations and writes per-seed and aggregate tables.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{ExperimentSpec, Overrides, Scheme, Sweep, SweepKind};
pub use error::{HarnessError, Result};
pub use output::{emit_results, OutputFormat};
pub use run::{run_experiment, ExperimentResult, PointResult, SchemeResult, SeedFailure, TraceRow};
