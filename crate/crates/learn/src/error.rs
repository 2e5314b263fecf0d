use thiserror::Error;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error(transparent)]
    Sim(#[from] natadv_sim::SimError),
    #[error(transparent)]
    Nn(#[from] natadv_nn::NnError),
    #[error(transparent)]
    Traffic(#[from] natadv_traffic::TrafficError),
    #[error("empty rollout buffer")]
    EmptyBuffer,
    #[error("empty expert buffer")]
    EmptyExpert,
    #[error("length mismatch: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("adversarial episode needs at least two vehicles")]
    NotEnoughVehicles,
    #[error("agent and AV under test start at the same position")]
    ZeroSeparation,
    #[error("discriminator output {0} outside (0, 1)")]
    BadDiscriminatorOutput(f64),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("encoding: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
