//! Experiment driver: configuration, seeds and CSV/JSON output for the
//! linear and lattice optimal-prediction experiments.

pub mod config;
pub mod error;
pub mod experiments;
pub mod pipeline;

pub use config::{parse_config, Experiment, ExperimentConfig, Seeds, DEFAULT_SEED};
pub use error::CliError;
pub use experiments::{run, RunSummary};
