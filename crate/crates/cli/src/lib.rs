//! Config-driven runner for the `dicke` command.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{parse_config, ExperimentConfig};
pub use error::CliError;
pub use run::{execute, load_config, RunOptions, RunSummary, Verb};
