//! Command-line front end: run configuration, model bundles and the
//! subcommands behind the `hypertrees` binary.

pub mod bundle;
pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod io;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
