use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no records to analyze")]
    Empty,
    #[error("{rows} rows cannot support {need} components/clusters")]
    TooFewRows { rows: usize, need: usize },
    #[error("row length mismatch: {a} vs {b}")]
    RaggedRows { a: usize, b: usize },
    #[error("non-finite value in input data")]
    NonFinite,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, AnalysisError>;
