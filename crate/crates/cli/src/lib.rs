//! Library surface of the command-line driver, split out so the subcommands
//! are directly testable.

pub mod config;
pub mod run;

pub use config::{parse_config, RunConfig, OUT_DIR_ENV};
pub use run::{run, Command, RunOptions};
