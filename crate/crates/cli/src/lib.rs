//! Command-line harness for `tkyweld`: workcell configuration, the perceive /
//! register / sweep / plan / bench experiments, and their CSV and SVG outputs.

pub mod commands;
pub mod config;
pub mod csv;
pub mod error;
pub mod pipeline;
pub mod seeds;
pub mod svg;

pub use commands::{Cli, Command};
pub use config::WorkcellConfig;
pub use error::CliError;
