//! Library backing the `pdao` binary: config parsing, the scenario catalog,
//! run orchestration, and method cross-validation. Integration tests drive
//! these pieces directly; `main.rs` is a thin clap wrapper.

pub mod catalog;
pub mod config;
pub mod report;
pub mod run;

use pdao_core::SimError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit code: 2 for config problems, 3 for integration failures,
    /// 4 when the truncated basis overflowed.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Sim(SimError::InvalidArgument(_)) => 2,
            CliError::Sim(SimError::TruncationOverflow { .. }) => 4,
            CliError::Sim(_) => 3,
            CliError::Io(_) => 3,
        }
    }
}
