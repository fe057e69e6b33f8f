//! Experiment harness: JSON configs in, reproducible CSV/JSON results out.

pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod output;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
pub use experiment::{run_experiment, ExperimentReport};
