//! Command-line front end: config loading and the four pipeline stages.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{cmd_evaluate, cmd_export, cmd_ingest, cmd_learn, ExportFormat};
pub use config::{Overrides, RunConfig, Solver, Task};
pub use error::{CliError, Result};
