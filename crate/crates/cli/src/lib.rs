//! Experiment harness for the chaos-ns solvers: configuration loading,
//! orchestrated runs, cross-validation, the invariant-suite runner and all
//! file output. The solver library itself stays I/O-free.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use commands::{cmd_compare, cmd_montecarlo, cmd_propagate, cmd_spectrum, cmd_validate, RunContext};
pub use config::ExperimentConfig;
pub use error::CliError;
