//! Configuration, CSV output and experiment commands behind the `vlcmod`
//! binary.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{run, CliError, Command, Outcome};
pub use config::{ConfigError, ExperimentConfig};
