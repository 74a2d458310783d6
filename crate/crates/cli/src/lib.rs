//! Batch front end: `run`, `check` and `bench`.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{cmd_bench, cmd_check, cmd_run, Overrides};
pub use config::{BenchConfig, RunConfig};
pub use error::{CliError, CliResult};
