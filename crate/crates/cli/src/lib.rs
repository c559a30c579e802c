//! Command implementations behind the `harmonic-extract` binary.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 convergence failure.

pub mod args;
pub mod evaluate;
pub mod extract;
pub mod fetch;
pub mod fsio;
pub mod serve;
pub mod synth;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Usage = 1,
    Data = 2,
    Convergence = 3,
}

#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            kind: ExitKind::Usage,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            kind: ExitKind::Data,
            message: message.into(),
        }
    }

    pub fn convergence(message: impl Into<String>) -> Self {
        Self {
            kind: ExitKind::Convergence,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind as i32
    }
}

pub type CliResult<T> = Result<T, CliError>;
