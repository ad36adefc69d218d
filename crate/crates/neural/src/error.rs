use thiserror::Error;

/// Errors raised by layers, models, and the training loop.
#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("sequence length {len} is shorter than kernel size {kernel}")]
    SequenceTooShort { len: usize, kernel: usize },

    #[error("batch normalization needs at least two samples per batch in training mode")]
    BatchTooSmall,

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("invalid training config: {0}")]
    InvalidConfig(String),

    #[error("backward called before a training-mode forward pass")]
    NoForwardCache,

    #[error("empty data: {0}")]
    EmptyData(String),

    #[error("model artifact: {0}")]
    Artifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, NnError>;
