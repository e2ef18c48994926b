//! Batch front end for SCUSUM: detection on gridded files, synthetic data,
//! Monte Carlo benchmarks, and manifest-driven replay.

pub mod args;
pub mod commands;
pub mod error;
pub mod formats;
pub mod manifest;

pub use args::Cli;
pub use commands::{configure_threads, run, THREADS_ENV};
pub use error::{CliError, CliResult, EXIT_INTERNAL, EXIT_USAGE};
