//! Configuration and pipeline behind the `horizon-ez` binary.

pub mod config;
pub mod pipeline;

pub use config::{ConfigError, Model, RunConfig};
pub use pipeline::{run_check_assumption, run_density, run_solve, run_strategy_export, run_verify, PipelineError};
