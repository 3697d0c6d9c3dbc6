//! Command-line driver: config, experiments, output files and plots.

pub mod config;
pub mod experiments;
pub mod fit;
pub mod plot;
pub mod runner;

pub use config::{ExperimentConfig, ExperimentKind, OUTPUT_ROOT_VAR};
pub use experiments::{run_experiment, Check, Fit, Outcome, Table};
pub use runner::{run, RunSummary};
