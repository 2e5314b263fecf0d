use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::collision::{detect_collision, CollisionEvent};
use crate::error::SimError;
use crate::road::RoadNetwork;
use crate::vehicle::{ControlAction, VehicleId, VehicleState};
use crate::wrap_angle;

/// Fixed-step integration settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Integration step, seconds.
    pub dt: f64,
    /// Episode length in steps.
    pub horizon_steps: u64,
    /// Effective axle separation for the bicycle model, meters.
    pub wheelbase: f64,
    /// Whether leaving every lane corridor ends the episode.
    pub offroad_terminates: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            horizon_steps: 100,
            wheelbase: 5.0,
            offroad_terminates: true,
        }
    }
}

/// Why an episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    EgoCollision,
    OffRoad,
    Horizon,
}

/// Snapshot of every vehicle at one step. Vehicles are kept sorted by id and
/// `time == step_index * dt` always holds.
#[derive(Debug, Clone)]
pub struct WorldState {
    pub step_index: u64,
    pub time: f64,
    pub vehicles: Vec<VehicleState>,
    pub road: Arc<RoadNetwork>,
    /// Seed that produced this world's initial conditions; carried along for
    /// reproducibility records.
    pub rng_seed: u64,
}

impl WorldState {
    pub fn new(road: Arc<RoadNetwork>, mut vehicles: Vec<VehicleState>, rng_seed: u64) -> Result<Self, SimError> {
        vehicles.sort_by_key(|v| v.id);
        for w in vehicles.windows(2) {
            if w[0].id == w[1].id {
                return Err(SimError::DuplicateVehicle(w[0].id.0));
            }
        }
        for v in &mut vehicles {
            if !(v.speed >= 0.0) {
                return Err(SimError::InvalidVehicle(v.id.0, format!("speed {} negative", v.speed)));
            }
            if !(v.length > 0.0 && v.width > 0.0) {
                return Err(SimError::InvalidVehicle(v.id.0, "non-positive body".into()));
            }
            v.lane = road.locate([v.x, v.y]).map(|(id, _)| id);
        }
        Ok(Self {
            step_index: 0,
            time: 0.0,
            vehicles,
            road,
            rng_seed,
        })
    }

    pub fn vehicle(&self, id: VehicleId) -> Option<&VehicleState> {
        self.vehicles
            .binary_search_by_key(&id, |v| v.id)
            .ok()
            .map(|i| &self.vehicles[i])
    }

    pub fn require_vehicle(&self, id: VehicleId) -> Result<&VehicleState, SimError> {
        self.vehicle(id).ok_or(SimError::UnknownVehicle(id.0))
    }
}

/// One kinematic bicycle step. The slip angle folds the steering command in
/// half at the body center; position and heading advance with the pre-update
/// speed, then speed integrates the acceleration and clamps at zero.
pub fn step_vehicle(state: &VehicleState, action: ControlAction, cfg: &SimConfig) -> VehicleState {
    let beta = (0.5 * action.steering.tan()).atan();
    let move_dir = state.heading + beta;
    let ds = state.speed * cfg.dt;
    VehicleState {
        x: state.x + ds * move_dir.cos(),
        y: state.y + ds * move_dir.sin(),
        heading: wrap_angle(state.heading + state.speed * beta.sin() / (cfg.wheelbase * 0.5) * cfg.dt),
        speed: (state.speed + action.accel * cfg.dt).max(0.0),
        ..*state
    }
}

/// Advances every vehicle one step from the same pre-step world, reassigns
/// lanes, and reports all body overlaps at the new positions. Vehicles
/// without a control entry coast (zero action). Contact does not deflect
/// motion; collisions are recorded, not resolved.
pub fn step_world(
    world: &WorldState,
    controls: &HashMap<VehicleId, ControlAction>,
    cfg: &SimConfig,
) -> (WorldState, Vec<CollisionEvent>) {
    let step_index = world.step_index + 1;
    let mut vehicles: Vec<VehicleState> = world
        .vehicles
        .iter()
        .map(|v| {
            let action = controls.get(&v.id).copied().unwrap_or_default();
            let mut next = step_vehicle(v, action, cfg);
            next.lane = world.road.locate([next.x, next.y]).map(|(id, _)| id);
            next
        })
        .collect();
    vehicles.sort_by_key(|v| v.id);
    let mut events = Vec::new();
    for i in 0..vehicles.len() {
        for j in i + 1..vehicles.len() {
            if let Some(ev) = detect_collision(step_index, &vehicles[i], &vehicles[j]) {
                events.push(ev);
            }
        }
    }
    let next = WorldState {
        step_index,
        time: step_index as f64 * cfg.dt,
        vehicles,
        road: Arc::clone(&world.road),
        rng_seed: world.rng_seed,
    };
    (next, events)
}

/// All other vehicles within `radius` of the ego center (closed ball),
/// sorted by ascending distance with ties broken by ascending id.
pub fn neighbors(world: &WorldState, ego: VehicleId, radius: f64) -> Result<Vec<(VehicleId, f64)>, SimError> {
    let ego_state = world.require_vehicle(ego)?;
    let mut out: Vec<(VehicleId, f64)> = world
        .vehicles
        .iter()
        .filter(|v| v.id != ego)
        .map(|v| (v.id, ego_state.distance_to(v)))
        .filter(|&(_, d)| d <= radius)
        .collect();
    out.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    Ok(out)
}

/// First-trigger episode termination for the ego vehicle, checked on the
/// post-step world: collision involving the ego, then off-road, then horizon.
pub fn episode_done(
    world: &WorldState,
    ego: VehicleId,
    step_events: &[CollisionEvent],
    cfg: &SimConfig,
) -> Result<Option<Termination>, SimError> {
    let ego_state = world.require_vehicle(ego)?;
    if step_events.iter().any(|e| e.involves(ego)) {
        return Ok(Some(Termination::EgoCollision));
    }
    if cfg.offroad_terminates && ego_state.lane.is_none() {
        return Ok(Some(Termination::OffRoad));
    }
    if world.step_index >= cfg.horizon_steps {
        return Ok(Some(Termination::Horizon));
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::road::LaneId;
    use std::f64::consts::FRAC_PI_4;

    fn world_on(road: RoadNetwork, vehicles: Vec<VehicleState>) -> WorldState {
        WorldState::new(Arc::new(road), vehicles, 0).unwrap()
    }

    #[test]
    fn straight_roll_advances_exactly_one_meter() {
        let cfg = SimConfig::default();
        let v = VehicleState::new(1, 0.0, 0.0, 0.0, 10.0);
        let next = step_vehicle(&v, ControlAction::default(), &cfg);
        assert_eq!(next.x, 1.0);
        assert_eq!(next.y, 0.0);
        assert_eq!(next.heading, 0.0);
        assert_eq!(next.speed, 10.0);
    }

    #[test]
    fn zero_speed_is_a_fixed_point() {
        let cfg = SimConfig::default();
        let v = VehicleState::new(1, 3.0, -2.0, 0.4, 0.0);
        let next = step_vehicle(&v, ControlAction::new(0.0, 0.9), &cfg);
        assert_eq!((next.x, next.y, next.heading, next.speed), (3.0, -2.0, 0.4, 0.0));
    }

    #[test]
    fn braking_clamps_speed_at_zero() {
        let cfg = SimConfig::default();
        let v = VehicleState::new(1, 0.0, 0.0, 0.0, 0.3);
        let next = step_vehicle(&v, ControlAction::new(-8.0, 0.0), &cfg);
        assert_eq!(next.speed, 0.0);
    }

    #[test]
    fn steering_turns_toward_commanded_side() {
        let cfg = SimConfig::default();
        let v = VehicleState::new(1, 0.0, 0.0, 0.0, 10.0);
        let left = step_vehicle(&v, ControlAction::new(0.0, 0.3), &cfg);
        assert!(left.heading > 0.0 && left.y > 0.0);
        let right = step_vehicle(&v, ControlAction::new(0.0, -0.3), &cfg);
        assert!(right.heading < 0.0 && right.y < 0.0);
        // same magnitude both ways
        assert!((left.heading + right.heading).abs() < 1e-12);
    }

    #[test]
    fn turning_radius_matches_bicycle_geometry() {
        // steady steering at constant speed traces a circle of radius
        // (wheelbase/2) / sin(beta); heading rate = speed / radius
        let cfg = SimConfig { dt: 0.001, ..SimConfig::default() };
        let steering: f64 = 0.2;
        let beta = (0.5 * steering.tan()).atan();
        let radius = (cfg.wheelbase * 0.5) / beta.sin();
        let mut v = VehicleState::new(1, 0.0, 0.0, 0.0, 10.0);
        let steps = 500;
        for _ in 0..steps {
            v = step_vehicle(&v, ControlAction::new(0.0, steering), &cfg);
        }
        let expected_heading = 10.0 / radius * (steps as f64 * cfg.dt);
        assert!((v.heading - expected_heading).abs() < 1e-9);
    }

    #[test]
    fn world_time_tracks_step_index() {
        let road = RoadNetwork::straight(1, 3.5, 1000.0);
        let mut w = world_on(road, vec![VehicleState::new(1, 0.0, 0.0, 0.0, 10.0)]);
        let cfg = SimConfig::default();
        for _ in 0..7 {
            (w, _) = step_world(&w, &HashMap::new(), &cfg);
        }
        assert_eq!(w.step_index, 7);
        assert_eq!(w.time, 7.0 * cfg.dt);
    }

    #[test]
    fn missing_control_coasts() {
        let road = RoadNetwork::straight(1, 3.5, 1000.0);
        let w = world_on(road, vec![VehicleState::new(1, 0.0, 0.0, 0.0, 10.0)]);
        let (next, events) = step_world(&w, &HashMap::new(), &SimConfig::default());
        assert!(events.is_empty());
        assert_eq!(next.vehicles[0].speed, 10.0);
        assert_eq!(next.vehicles[0].x, 1.0);
    }

    #[test]
    fn lane_reassignment_after_lateral_motion() {
        let road = RoadNetwork::straight(2, 3.5, 1000.0);
        // drifting right at a shallow angle: the body center crosses into
        // lane 1 once y < -1.75
        let mut w = world_on(road, vec![VehicleState::new(1, 50.0, 0.0, -0.1, 10.0)]);
        assert_eq!(w.vehicles[0].lane, Some(LaneId(0)));
        let cfg = SimConfig::default();
        for _ in 0..20 {
            (w, _) = step_world(&w, &HashMap::new(), &cfg);
        }
        assert!(w.vehicles[0].y < -1.75 && w.vehicles[0].y > -5.25);
        assert_eq!(w.vehicles[0].lane, Some(LaneId(1)));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let road = Arc::new(RoadNetwork::straight(1, 3.5, 100.0));
        let err = WorldState::new(
            road,
            vec![VehicleState::new(1, 0.0, 0.0, 0.0, 1.0), VehicleState::new(1, 10.0, 0.0, 0.0, 1.0)],
            0,
        );
        assert!(matches!(err, Err(SimError::DuplicateVehicle(1))));
    }

    #[test]
    fn neighbor_query_sorts_and_breaks_ties_by_id() {
        let road = RoadNetwork::straight(3, 3.5, 1000.0);
        let w = world_on(
            road,
            vec![
                VehicleState::new(1, 0.0, 0.0, 0.0, 10.0),
                VehicleState::new(2, 30.0, 0.0, 0.0, 10.0),
                VehicleState::new(3, 0.0, -3.5, 0.0, 10.0),
                VehicleState::new(4, -30.0, 0.0, 0.0, 10.0),
                VehicleState::new(5, 80.0, 0.0, 0.0, 10.0),
            ],
        );
        let n = neighbors(&w, VehicleId(1), 50.0).unwrap();
        assert_eq!(
            n.iter().map(|&(id, _)| id.0).collect::<Vec<_>>(),
            vec![3, 2, 4]
        );
        // the ball is closed: vehicles at exactly the radius are included
        let n = neighbors(&w, VehicleId(1), 30.0).unwrap();
        assert_eq!(n.len(), 3);
        assert_eq!(neighbors(&w, VehicleId(1), 29.0).unwrap().len(), 1);
        assert!(neighbors(&w, VehicleId(9), 50.0).is_err());
    }

    #[test]
    fn termination_priority_and_horizon() {
        let road = RoadNetwork::straight(1, 3.5, 10_000.0);
        let cfg = SimConfig::default();
        let mut w = world_on(road, vec![VehicleState::new(1, 0.0, 0.0, 0.0, 10.0)]);
        for _ in 0..99 {
            (w, _) = step_world(&w, &HashMap::new(), &cfg);
            assert_eq!(episode_done(&w, VehicleId(1), &[], &cfg).unwrap(), None);
        }
        (w, _) = step_world(&w, &HashMap::new(), &cfg);
        assert_eq!(
            episode_done(&w, VehicleId(1), &[], &cfg).unwrap(),
            Some(Termination::Horizon)
        );
        // a collision at the horizon still reports as a collision
        let ev = detect_collision(100, &w.vehicles[0], &VehicleState::new(7, w.vehicles[0].x, w.vehicles[0].y, 0.0, 0.0)).unwrap();
        assert_eq!(
            episode_done(&w, VehicleId(1), &[ev], &cfg).unwrap(),
            Some(Termination::EgoCollision)
        );
    }

    #[test]
    fn offroad_termination_fires_when_enabled() {
        let road = RoadNetwork::straight(1, 3.5, 1000.0);
        let cfg = SimConfig::default();
        let mut w = world_on(road, vec![VehicleState::new(1, 50.0, 0.0, FRAC_PI_4, 10.0)]);
        let mut done = None;
        for _ in 0..40 {
            let (next, events) = step_world(&w, &HashMap::new(), &cfg);
            w = next;
            done = episode_done(&w, VehicleId(1), &events, &cfg).unwrap();
            if done.is_some() {
                break;
            }
        }
        assert_eq!(done, Some(Termination::OffRoad));
        let relaxed = SimConfig { offroad_terminates: false, ..cfg };
        assert_eq!(episode_done(&w, VehicleId(1), &[], &relaxed).unwrap(), None);
    }
}
