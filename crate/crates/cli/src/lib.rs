//! Batch front end of the `anisopml` solver: configuration files, the
//! `check`, `reference`, `solve`, `compare` and `damping` commands, and
//! their CSV/JSON/SVG artifacts.

pub mod commands;
pub mod compare;
pub mod config;
pub mod svg;

pub use commands::{CliError, Outcome};
pub use config::{ConfigError, LoadedConfig, RunConfig};
