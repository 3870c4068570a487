//! Config parsing and subcommand dispatch for the `share` benchmark CLI.

pub mod config;
pub mod dispatch;

pub use config::{parse_config, parse_config_text, ConfigError, RunConfig};
pub use dispatch::{dispatch, Overrides, Subcommand};
