//! Benchmark harness and inspection commands behind the `ncopt` binary.

pub mod bench;
pub mod cli;
pub mod config;
pub mod error;
pub mod format;
pub mod problem;

pub use error::{CliError, CliResult};
