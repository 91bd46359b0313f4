//! Batch runner for the random projection experiments.

pub mod config;
pub mod run;

pub use config::{Args, ConfigError, Experiment, RunConfig};
pub use run::{run, Outcome, RunError};
