//! Error type shared across the toolkit.
//!
//! The variants are grouped by who is at fault: `Validation`, `Config` and
//! `Input` mean the caller handed us something inconsistent (the CLI maps
//! them to exit code 2), while `Runtime` and `Io` mean the work itself
//! failed (exit code 1).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A domain invariant was violated (degenerate box, malformed record, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// Dimensions or settings that cannot be combined.
    #[error("configuration error: {0}")]
    Config(String),

    /// A required input is missing or unreadable.
    #[error("input error: {0}")]
    Input(String),

    /// The computation itself went wrong (non-finite loss, ...).
    #[error("runtime error: {0}")]
    Runtime(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        Error::Runtime(msg.into())
    }

    /// True when the error is the caller's fault; the CLI exits with
    /// status 2 for these and status 1 for everything else.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Validation(_) | Error::Config(_) | Error::Input(_)
        )
    }
}
