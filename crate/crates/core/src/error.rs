use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed pcap global header: {0}")]
    PcapHeader(String),

    #[error("unsupported link type {0} (only Ethernet is supported)")]
    LinkType(u32),

    #[error("invalid CIDR `{0}`")]
    Cidr(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("timestamps decrease at index {index}")]
    DecreasingTimestamps { index: usize },

    #[error("percentile fraction {0} outside [0, 1]")]
    PercentileRange(f64),

    #[error("min-connections threshold {threshold} removes every class")]
    NoClassesLeft { threshold: usize },

    #[error("class `{class}` has {count} samples, fewer than k = {k}")]
    ClassTooSmall { class: String, count: usize, k: usize },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("flow file line {line}: {message}")]
    FlowFile { line: usize, message: String },

    #[error("dataset file: {0}")]
    DatasetFile(String),

    #[error(transparent)]
    Neural(#[from] sniforge_neural::NnError),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
