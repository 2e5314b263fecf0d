use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("stale cache: network parameters changed since the forward pass")]
    StaleCache,
    #[error("non-positive variance {0}")]
    NonPositiveVariance(f64),
    #[error("negative variance {0}")]
    NegativeVariance(f64),
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("checkpoint format version {got} unsupported (expected {expected})")]
    CheckpointVersion { expected: u32, got: u32 },
    #[error("checkpoint payload does not match: {0}")]
    CheckpointMismatch(String),
    #[error("checkpoint contains non-finite parameters")]
    NonFiniteParams,
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint encoding: {0}")]
    Encoding(#[from] serde_json::Error),
}
