//! State encodings for the imitation prior and the adversarial agent.

use natadv_sim::{neighbors, relative_features, VehicleId, WorldState, REL_FEATURE_DIM};

use crate::error::LearnError;

pub const GAIL_EGO_DIM: usize = 6;
pub const GAIL_NEIGHBOR_SLOTS: usize = 10;
pub const GAIL_FEATURE_DIM: usize = GAIL_EGO_DIM + GAIL_NEIGHBOR_SLOTS * REL_FEATURE_DIM;
pub const NEIGHBOR_RADIUS: f64 = 50.0;

/// 56-dim observation: ego block `[length, width, lateral offset, lateral
/// speed, longitudinal speed, steering]` followed by ten 5-feature slots for
/// the nearest vehicles within 50 m, ascending distance, zero-padded.
/// Lateral offset and steering are measured against the nearest lane
/// centerline; `off_lane` marks an ego outside every lane corridor.
#[derive(Debug, Clone, PartialEq)]
pub struct GailFeatures {
    pub values: Vec<f64>,
    pub off_lane: bool,
}

pub fn gail_state_features(world: &WorldState, ego: VehicleId) -> Result<GailFeatures, LearnError> {
    let state = world.require_vehicle(ego)?;
    let (lane, proj) = world.road.nearest_lane([state.x, state.y]);
    let off_lane = proj.distance > lane.width * 0.5 + 1e-9;
    let steering = natadv_sim::wrap_angle(state.heading - proj.heading);

    let mut values = vec![0.0; GAIL_FEATURE_DIM];
    values[0] = state.length;
    values[1] = state.width;
    values[2] = proj.lateral;
    values[3] = state.speed * steering.sin();
    values[4] = state.speed * steering.cos();
    values[5] = steering;

    let near = neighbors(world, ego, NEIGHBOR_RADIUS)?;
    for (slot, (id, _)) in near.iter().take(GAIL_NEIGHBOR_SLOTS).enumerate() {
        let other = world.require_vehicle(*id)?;
        let rel = relative_features(state, other);
        let base = GAIL_EGO_DIM + slot * REL_FEATURE_DIM;
        values[base..base + REL_FEATURE_DIM].copy_from_slice(&rel);
    }
    Ok(GailFeatures { values, off_lane })
}

pub const ADV_STATE_DIM: usize = 10;

/// 10-dim adversarial observation: the agent's 5 relative features toward
/// the vehicle under test, then the agent's lateral offset, lateral speed,
/// longitudinal speed, and steering (all against its nearest lane), and the
/// speed of the vehicle under test.
pub fn adv_state_features(
    world: &WorldState,
    agent: VehicleId,
    av: VehicleId,
) -> Result<Vec<f64>, LearnError> {
    let agent_state = world.require_vehicle(agent)?;
    let av_state = world.require_vehicle(av)?;
    let rel = relative_features(agent_state, av_state);

    let (_, proj) = world.road.nearest_lane([agent_state.x, agent_state.y]);
    let steering = natadv_sim::wrap_angle(agent_state.heading - proj.heading);

    let mut values = Vec::with_capacity(ADV_STATE_DIM);
    values.extend_from_slice(&rel);
    values.push(proj.lateral);
    values.push(agent_state.speed * steering.sin());
    values.push(agent_state.speed * steering.cos());
    values.push(steering);
    values.push(av_state.speed);
    Ok(values)
}
