//! Experiment runner for `nash-core`: JSON run configurations, CSV traces and
//! run summaries.

pub mod config;
pub mod run;
pub mod trace;

pub use config::{parse_config, ConfigError, RunConfig};
pub use run::{execute, run, Outcome};
