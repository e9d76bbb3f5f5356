//! Command-line front end for `twotier`: ratio fits, outage and capacity
//! sweeps written as CSV, and an oracle validation report.

pub mod commands;
pub mod config;
pub mod error;
pub mod format;
pub mod validate;

pub use config::RunConfig;
pub use error::{CliError, Result};
