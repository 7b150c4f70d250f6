//! Library side of the `speedwitness` command: configuration, record
//! ingestion, commands and report serialization.

pub mod commands;
pub mod config;
pub mod error;
pub mod records;
pub mod report;

pub use error::{CliError, CliResult};
