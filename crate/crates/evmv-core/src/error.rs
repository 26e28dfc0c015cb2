use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation's precondition (dimension mismatch,
    /// out-of-range parameter, empty required input, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A configuration cannot be realized (e.g. more window bins than the
    /// axis has values).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The input stream is too degenerate for the requested operation.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Text input could not be parsed; `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A binary payload violates its documented format.
    #[error("format error: {0}")]
    Format(String),

    /// A computation produced a non-finite value.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
