use thiserror::Error;

/// Errors raised by the numeric toolkit.
#[derive(Error, Debug)]
pub enum CoreError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("dimension index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("non-finite value produced in {0}")]
    NonFinite(String),
    #[error("gradient target must be a scalar, got shape {0:?}")]
    NonScalarOutput(Vec<usize>),
    #[error("training aborted: non-finite loss at step {step}")]
    NanLoss { step: usize },
    #[error("missing label {0:?}")]
    MissingLabel(String),
    #[error("ActNorm layer used before data-dependent initialization")]
    UninitializedActNorm,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error("malformed record at line {line}: {message}")]
    MalformedRecord { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, CoreError>;
