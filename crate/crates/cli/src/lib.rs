//! Experiment runner: configuration, instance generation and result files.

pub mod config;
pub mod experiment;
pub mod output;

pub use config::{ConfigError, Consumption, ExperimentConfig, ExperimentKind};
pub use experiment::{generate_instance, run_experiment, ResultRow};
