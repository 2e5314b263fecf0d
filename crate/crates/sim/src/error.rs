use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("unknown vehicle id {0}")]
    UnknownVehicle(u64),
    #[error("duplicate vehicle id {0}")]
    DuplicateVehicle(u64),
    #[error("road has no lanes")]
    EmptyRoad,
    #[error("duplicate lane id {0}")]
    DuplicateLane(u32),
    #[error("lane {0}: {1}")]
    InvalidLane(u32, String),
    #[error("lane adjacency between {0} and {1} is not symmetric")]
    AsymmetricAdjacency(u32, u32),
    #[error("vehicle {0}: {1}")]
    InvalidVehicle(u64, String),
}
