use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse failure class, used by the command-line front end to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("{op}: non-finite value produced or supplied")]
    NonFinite { op: &'static str },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("window too short: need {needed} steps, have {available}")]
    WindowTooShort { needed: usize, available: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },

    #[error("non-finite gradient for parameter `{param}`")]
    NonFiniteGradient { param: String },

    #[error("function is not deterministic: two forward passes differ by {diff:e}")]
    NonDeterministic { diff: f64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("all {count} grid runs failed: {diagnostics}")]
    GridExhausted { count: usize, diagnostics: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_) | Error::Contract(_) => ErrorCategory::Config,
            Error::Parse { .. }
            | Error::Data(_)
            | Error::WindowTooShort { .. }
            | Error::Checkpoint(_)
            | Error::Io(_) => ErrorCategory::Data,
            Error::Shape { .. } => ErrorCategory::Data,
            Error::NonFinite { .. }
            | Error::Degenerate(_)
            | Error::Singular(_)
            | Error::Diverged { .. }
            | Error::NonFiniteGradient { .. }
            | Error::NonDeterministic { .. }
            | Error::GridExhausted { .. } => ErrorCategory::Numeric,
        }
    }
}
