//! Command-line front end: simulation, ingestion, estimation, diagnostics
//! and method comparison. File formats live in [`formats`].

pub mod args;
pub mod commands;
pub mod error;
pub mod formats;
pub mod pipeline;

pub use error::CliError;
