//! Command-line front end: CSV ingestion and the `ckdr` subcommands.

pub mod commands;
pub mod error;
pub mod ingest;

pub use commands::{run, Cli, Command};
pub use error::{CliError, Result};
pub use ingest::{ingest_csv, write_csv, BinaryMap, Dataset, IngestOptions, ResponseKind};
