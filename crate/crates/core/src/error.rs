use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    /// An argument outside the operation's domain (unknown node, empty input, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration that can never run (f + g too large, ε ≤ 0, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// The ascending auction did not settle within its round guard.
    #[error("auction did not terminate within {max_rounds} rounds")]
    NonTermination {
        max_rounds: usize,
        trace: Vec<crate::wipd::TraceRow>,
    },

    /// A post-condition that must hold for every emitted report was broken.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
