//! Command-line harness: stream loading, report formats and the `binorbit`
//! subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod numfmt;
pub mod output;

pub use commands::{run_cli, run_with_io};
pub use config::RunConfig;
pub use error::CliError;
