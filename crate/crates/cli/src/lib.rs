//! Configuration-driven driver for the `nlpme` solver: parse a TOML run
//! description, build the scheme, execute a study and write CSV tables and
//! snapshots.

pub mod build;
pub mod commands;
pub mod config;
pub mod output;

pub use commands::{execute, CliError, Context, Outcome};
pub use config::{parse_config, parse_config_str, ConfigError, RunConfig};
