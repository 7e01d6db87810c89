//! File formats and subcommands of the `omniview` tool.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod raster;

pub use error::{CliError, CliResult};
