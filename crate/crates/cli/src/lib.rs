//! Experiment harness for the coverage optimizers: environment generation,
//! tensor precomputation, optimizer runs with CSV histories, and reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod history;
pub mod report;

pub use config::{ExperimentConfig, Method, RunOverrides};
pub use error::{CliError, Result};
