use thiserror::Error;

/// Errors raised by the engine, grouped by the contract they break.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor shapes or architecture dimensions do not line up.
    #[error("dimension error: {0}")]
    Dimension(String),
    /// A caller-supplied value is outside its documented range.
    #[error("parameter error: {0}")]
    Parameter(String),
    /// Input data violates its format or its invariants.
    #[error("data error: {0}")]
    Data(String),
    /// A binary file does not match its documented layout.
    #[error("format error at offset {offset}: {msg}")]
    Format { offset: u64, msg: String },
    /// An operation was called in a state it does not support.
    #[error("usage error: {0}")]
    Usage(String),
    /// Training produced a non-finite value; the run must abort.
    #[error("numeric divergence: {0}")]
    Divergence(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
