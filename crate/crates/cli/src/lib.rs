//! Experiment runner behind the `constbandit` binary.

pub mod commands;
pub mod config;
pub mod output;
pub mod presets;

use thiserror::Error;

/// Environment variable that overrides the base seed.
pub const SEED_ENV: &str = "CONSTBANDIT_SEED";

#[derive(Debug, Error)]
pub enum CliError {
    /// A checked property did not hold.
    #[error("{0}")]
    Assertion(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Assertion(_) => 1,
            Self::Config(_) => 2,
            Self::Io(_) => 3,
        }
    }
}

impl From<constbandit::Error> for CliError {
    fn from(e: constbandit::Error) -> Self {
        Self::Config(e.to_string())
    }
}
