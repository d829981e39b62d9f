//! File formats, experiment harness and command-line front end around
//! `coral-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod selftest;

pub use config::RunConfig;
pub use error::{Category, CliError, CliResult};
