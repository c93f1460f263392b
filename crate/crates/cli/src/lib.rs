//! Experiment runner for `rieszlab`: TOML configs in, JSON reports and
//! CSV tables out.

pub mod config;
pub mod error;
pub mod experiments;
pub mod fixtures;
pub mod report;

pub use config::{ExperimentConfig, Overrides};
pub use error::{CliError, CliResult};
pub use experiments::run_experiment;
pub use report::{emit_plot_data, Report};
