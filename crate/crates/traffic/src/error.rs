use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrafficError {
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("required column `{column}` not found in header")]
    MissingColumn { column: String },
    #[error("row {row}: bad value in column `{column}`: {message}")]
    BadField {
        row: usize,
        column: String,
        message: String,
    },
    #[error("vehicle {vehicle}: frame numbers must be strictly increasing")]
    NonMonotonicFrames { vehicle: u64 },
    #[error("vehicle {vehicle}: episode has no records")]
    EmptyEpisode { vehicle: u64 },
    #[error("invalid road geometry: {0}")]
    InvalidGeometry(String),
    #[error(transparent)]
    Sim(#[from] natadv_sim::SimError),
    #[error("series is empty")]
    EmptySeries,
    #[error("series too short: need at least {need} samples, got {got}")]
    ShortSeries { need: usize, got: usize },
    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("series length mismatch: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("observed gap at index {index} is zero; mixed error is undefined")]
    ZeroDataGap { index: usize },
    #[error("gap must be positive, got {value}")]
    NonPositiveGap { value: f64 },
    #[error("{0}")]
    EmptyCorpus(String),
    #[error("vehicle {0} has no usable lane assignment")]
    NoLane(u64),
}
