//! Runs, file formats and parallel drivers on top of `ambmerton-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod parallel;

pub use commands::{run, Command, Output};
pub use config::RunConfig;
pub use error::{CliError, CliResult};
