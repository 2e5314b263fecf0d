//! Expert state-action extraction from recorded trajectories.
//!
//! Selected vehicles are cut into disjoint 100-frame windows, each window is
//! checked against traffic-density and speed rules, and surviving windows
//! yield (56-dim state, 2-dim action) pairs plus a replayable scenario for
//! imitation training. Actions are recovered by inverting the kinematic
//! bicycle step between consecutive frames.

use std::collections::{BTreeMap, HashSet};
use std::f64::consts::FRAC_PI_3;
use std::io::{Read, Write};
use std::sync::Arc;

use natadv_sim::{
    detect_collision, ActionBounds, ControlAction, RoadNetwork, SimConfig, VehicleId, VehicleState,
    WorldState, DEFAULT_LENGTH, DEFAULT_WIDTH,
};
use natadv_traffic::{extract_lane_change_events, Episode, DEFAULT_HEADING_THRESHOLD};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::LearnError;
use crate::features::{gail_state_features, GAIL_FEATURE_DIM};

/// Acceleration and steering limits recorded expert actions are held to.
pub fn expert_action_bounds() -> ActionBounds {
    ActionBounds::new([-5.0, 3.0], [-FRAC_PI_3, FRAC_PI_3])
}

/// Window selection and screening rules for expert collection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollectionRules {
    /// Frames per scenario window.
    pub scenario_steps: usize,
    /// Windows per selected vehicle.
    pub max_scenarios: usize,
    /// A window is skipped when its first frame holds more vehicles.
    pub max_vehicles: usize,
    /// A window is skipped when the mean speed over its first frame is lower.
    pub min_mean_speed: f64,
    /// Restrict selection to vehicles with at least one lane change.
    pub lane_changers_only: bool,
}

impl Default for CollectionRules {
    fn default() -> Self {
        Self {
            scenario_steps: 100,
            max_scenarios: 4,
            max_vehicles: 40,
            min_mean_speed: 5.0,
            lane_changers_only: true,
        }
    }
}

/// One vehicle at one recorded frame, with the derived heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleSnap {
    pub id: u64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub length: f64,
    pub width: f64,
}

impl VehicleSnap {
    pub fn to_state(&self) -> VehicleState {
        VehicleState::new(self.id, self.x, self.y, self.heading, self.speed)
            .with_body(self.length, self.width)
    }
}

/// A replayable window: every vehicle present at each of its frames, in id
/// order, the selected vehicle included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayScenario {
    pub ego: u64,
    pub start_frame: u64,
    pub frames: Vec<Vec<VehicleSnap>>,
}

impl ReplayScenario {
    pub fn ego_snap(&self, frame_idx: usize) -> Option<&VehicleSnap> {
        self.frames.get(frame_idx)?.iter().find(|s| s.id == self.ego)
    }
}

/// Collected expert pairs. States are 56-dim and finite; actions respect the
/// expert bounds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpertBuffer {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<[f64; 2]>,
}

impl ExpertBuffer {
    pub fn push(&mut self, state: Vec<f64>, action: [f64; 2]) -> Result<(), LearnError> {
        if state.len() != GAIL_FEATURE_DIM {
            return Err(LearnError::LengthMismatch { a: state.len(), b: GAIL_FEATURE_DIM });
        }
        if !state.iter().all(|v| v.is_finite()) {
            return Err(LearnError::InvalidConfig("non-finite expert state".into()));
        }
        let bounds = expert_action_bounds();
        if !bounds.contains(ControlAction::new(action[0], action[1])) {
            return Err(LearnError::InvalidConfig(format!(
                "expert action ({}, {}) outside bounds",
                action[0], action[1]
            )));
        }
        self.states.push(state);
        self.actions.push(action);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Per-dimension mean and population variance of the stored actions.
    pub fn action_moments(&self) -> ([f64; 2], [f64; 2]) {
        let n = self.actions.len().max(1) as f64;
        let mut mean = [0.0; 2];
        for a in &self.actions {
            mean[0] += a[0] / n;
            mean[1] += a[1] / n;
        }
        let mut var = [0.0; 2];
        for a in &self.actions {
            var[0] += (a[0] - mean[0]).powi(2) / n;
            var[1] += (a[1] - mean[1]).powi(2) / n;
        }
        (mean, var)
    }

    pub fn save<W: Write>(&self, w: W) -> Result<(), LearnError> {
        serde_json::to_writer(w, self)?;
        Ok(())
    }

    pub fn load<R: Read>(r: R) -> Result<Self, LearnError> {
        let buf: Self = serde_json::from_reader(r)?;
        for s in &buf.states {
            if s.len() != GAIL_FEATURE_DIM || !s.iter().all(|v| v.is_finite()) {
                return Err(LearnError::InvalidConfig("corrupt expert state".into()));
            }
        }
        Ok(buf)
    }
}

/// Recovers the (accel, steering) control that the bicycle step would need
/// to move from `v0` to `v1` over one `dt`. Unclamped; degenerate motion
/// (standstill) yields zero steering.
pub fn invert_bicycle(v0: &VehicleSnap, v1: &VehicleSnap, dt: f64, wheelbase: f64) -> [f64; 2] {
    let accel = (v1.speed - v0.speed) / dt;
    let travel = v0.speed * dt;
    if travel.abs() < 1e-9 {
        return [accel, 0.0];
    }
    let dpsi = natadv_sim::wrap_angle(v1.heading - v0.heading);
    let sin_beta = (dpsi * 0.5 * wheelbase / travel).clamp(-1.0, 1.0);
    let beta = sin_beta.asin();
    let steering = (2.0 * beta.tan()).atan();
    [accel, steering]
}

/// Headings from central differences of recorded positions, one-sided at
/// the track ends, zero for degenerate displacements.
fn derive_headings(episode: &Episode) -> Vec<f64> {
    let n = episode.records.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let (lo, hi) = if n == 1 {
            (0, 0)
        } else if i == 0 {
            (0, 1)
        } else if i == n - 1 {
            (n - 2, n - 1)
        } else {
            (i - 1, i + 1)
        };
        let dx = episode.records[hi].x - episode.records[lo].x;
        let dy = episode.records[hi].y - episode.records[lo].y;
        if dx != 0.0 || dy != 0.0 {
            out[i] = dy.atan2(dx);
        }
    }
    out
}

fn snap_of(episode: &Episode, idx: usize, heading: f64) -> VehicleSnap {
    let r = &episode.records[idx];
    VehicleSnap {
        id: r.vehicle_id,
        x: r.x,
        y: r.y,
        heading,
        speed: r.speed,
        length: r.length.unwrap_or(DEFAULT_LENGTH),
        width: r.width.unwrap_or(DEFAULT_WIDTH),
    }
}

/// `count` disjoint window start indices over a track of `len` frames.
/// Consecutive from the start when the track is no longer than the windows
/// combined; uniformly random disjoint placement otherwise.
fn window_starts<R: Rng + ?Sized>(len: usize, steps: usize, count: usize, rng: &mut R) -> Vec<usize> {
    if count * steps >= len {
        return (0..count).map(|i| i * steps).collect();
    }
    let slack = len - count * steps;
    let mut offsets: Vec<usize> = (0..count).map(|_| rng.random_range(0..=slack)).collect();
    offsets.sort_unstable();
    offsets.iter().enumerate().map(|(i, o)| o + i * steps).collect()
}

/// Cuts eligible vehicles into screened windows and extracts expert pairs.
/// Windows whose replay would crash or leave the road contribute nothing.
/// Returns the pairs and the surviving windows for replay training.
pub fn collect_expert_trajectories(
    episodes: &[Episode],
    road: &Arc<RoadNetwork>,
    rules: &CollectionRules,
    cfg: &SimConfig,
    seed: u64,
) -> Result<(ExpertBuffer, Vec<ReplayScenario>), LearnError> {
    if rules.scenario_steps < 2 || rules.max_scenarios == 0 {
        return Err(LearnError::InvalidConfig(
            "scenario_steps must be at least 2 and max_scenarios nonzero".into(),
        ));
    }
    let headings: Vec<Vec<f64>> = episodes.iter().map(derive_headings).collect();

    // frame -> (episode index, record index) of every vehicle present.
    let mut frame_table: BTreeMap<u64, Vec<(usize, usize)>> = BTreeMap::new();
    for (ei, ep) in episodes.iter().enumerate() {
        for (ri, r) in ep.records.iter().enumerate() {
            frame_table.entry(r.frame).or_default().push((ei, ri));
        }
    }
    let snapshot = |frame: u64| -> Vec<VehicleSnap> {
        let mut snaps: Vec<VehicleSnap> = frame_table
            .get(&frame)
            .map(|rows| {
                rows.iter().map(|&(ei, ri)| snap_of(&episodes[ei], ri, headings[ei][ri])).collect()
            })
            .unwrap_or_default();
        snaps.sort_by_key(|s| s.id);
        snaps
    };

    let changers: Option<HashSet<u64>> = rules.lane_changers_only.then(|| {
        extract_lane_change_events(episodes, road, DEFAULT_HEADING_THRESHOLD)
            .iter()
            .map(|e| e.vehicle_id)
            .collect()
    });

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bounds = expert_action_bounds();
    let mut buffer = ExpertBuffer::default();
    let mut scenarios = Vec::new();

    let mut order: Vec<usize> = (0..episodes.len()).collect();
    order.sort_by_key(|&i| episodes[i].vehicle_id);

    for ei in order {
        let ep = &episodes[ei];
        if let Some(ids) = &changers {
            if !ids.contains(&ep.vehicle_id) {
                continue;
            }
        }
        let count = (ep.len() / rules.scenario_steps).min(rules.max_scenarios);
        if count == 0 {
            continue;
        }
        'window: for start in window_starts(ep.len(), rules.scenario_steps, count, &mut rng) {
            let recs = &ep.records[start..start + rules.scenario_steps];
            // Windows must be gap-free so frames line up across vehicles.
            if recs.last().unwrap().frame - recs[0].frame != rules.scenario_steps as u64 - 1 {
                continue;
            }

            let first = snapshot(recs[0].frame);
            if first.len() > rules.max_vehicles {
                continue;
            }
            let mean_speed = first.iter().map(|s| s.speed).sum::<f64>() / first.len() as f64;
            if mean_speed < rules.min_mean_speed {
                continue;
            }

            let mut frames = Vec::with_capacity(rules.scenario_steps);
            for rec in recs {
                let snaps = snapshot(rec.frame);
                let ego = snaps.iter().find(|s| s.id == ep.vehicle_id).expect("ego covers window");
                if road.locate([ego.x, ego.y]).is_none() {
                    continue 'window;
                }
                let ego_state = ego.to_state();
                for other in snaps.iter().filter(|s| s.id != ep.vehicle_id) {
                    if detect_collision(rec.frame, &ego_state, &other.to_state()).is_some() {
                        continue 'window;
                    }
                }
                frames.push(snaps);
            }

            for t in 0..rules.scenario_steps - 1 {
                let states: Vec<VehicleState> = frames[t].iter().map(|s| s.to_state()).collect();
                let world = WorldState::new(Arc::clone(road), states, 0)?;
                let features = gail_state_features(&world, VehicleId(ep.vehicle_id))?;
                let ego0 = frames[t].iter().find(|s| s.id == ep.vehicle_id).unwrap();
                let ego1 = frames[t + 1].iter().find(|s| s.id == ep.vehicle_id).unwrap();
                let raw = invert_bicycle(ego0, ego1, ep.dt, cfg.wheelbase);
                let cmd = bounds.clamp(ControlAction::new(raw[0], raw[1]));
                buffer.push(features.values, [cmd.accel, cmd.steering])?;
            }
            scenarios.push(ReplayScenario {
                ego: ep.vehicle_id,
                start_frame: recs[0].frame,
                frames,
            });
        }
    }
    Ok((buffer, scenarios))
}
