//! Config-driven experiment runner: parses a `key = value` file, runs one
//! experiment and writes its trajectory as CSV.

pub mod app;
pub mod config;
pub mod run;

pub use config::{parse_config, ConfigError, ExperimentConfig};
pub use run::{run, RunError, RunSummary, Value};
