//! Command implementations behind the `traffic-em` binary.

pub mod commands;
pub mod config;
pub mod pipeline;

use thiserror::Error;
use traffic_core::io::IoError;

pub use config::{Profile, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("runtime: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }

    /// Failure reading an input.
    pub fn input(e: IoError) -> Self {
        CliError::Data(e.to_string())
    }

    /// Failure writing an output.
    pub fn output(e: IoError) -> Self {
        CliError::Runtime(e.to_string())
    }
}
