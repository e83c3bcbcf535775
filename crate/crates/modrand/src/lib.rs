//! Experiment harness for the model-randomization privacy filter: JSON
//! configuration, parallel Monte Carlo drivers, and the CSV/JSON outputs
//! behind the `modrand` command-line tool.

pub mod config;
pub mod harness;
pub mod parallel;

pub use config::{occupancy_config, Experiment, ExperimentConfig};
