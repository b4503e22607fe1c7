//! Config handling and subcommands behind the `psinehari` binary.

pub mod commands;
pub mod config;

pub use config::{CliError, CliResult, RunConfig};
