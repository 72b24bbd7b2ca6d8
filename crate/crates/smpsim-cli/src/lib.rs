//! Library side of the `smpsim` command-line tool: run-configuration
//! parsing, the four subcommands, and the deterministic output writers.
//!
//! Everything a subcommand writes is a pure function of `(config, seed)`;
//! replications are parallelized but results are keyed and written by
//! replication index, so reruns are byte-identical at any thread count.

pub mod commands;
pub mod output;
pub mod run_config;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error("simulation error: {0}")]
    Sim(#[from] smpsim::Error),

    #[error("model config error: {0}")]
    Model(#[from] smpsim::config::ConfigError),
}

impl CliError {
    /// Usage/config/IO problems exit 2; failed checks exit 1 (handled by the
    /// caller from [`commands::CmdOutcome`]); success exits 0.
    pub fn exit_code(&self) -> i32 {
        2
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
