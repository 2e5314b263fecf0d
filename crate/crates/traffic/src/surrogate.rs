//! Rule-based background driver: IDM for the pedal, MOBIL for lane choice,
//! and a Stanley-style tracker for the wheel. Fully deterministic, so
//! simulated traffic replays bit-identically.

use serde::{Deserialize, Serialize};

use natadv_sim::{wrap_angle, ActionBounds, ControlAction, LaneId, VehicleId, WorldState};

use crate::idm::IdmParameters;
use crate::mobil::{accel_toward_lane_leader, mobil_decide, LaneChangeDecision, MobilParameters};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub idm: IdmParameters,
    pub mobil: MobilParameters,
    pub bounds: ActionBounds,
    /// Steps between lane-change decisions once the vehicle is settled.
    pub decision_period_steps: u64,
    /// Stanley cross-track gain.
    pub cross_track_gain: f64,
    /// Heading error gain.
    pub heading_gain: f64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            idm: IdmParameters::default(),
            mobil: MobilParameters::default(),
            bounds: ActionBounds::new(
                [-5.0, 3.0],
                [-std::f64::consts::FRAC_PI_3, std::f64::consts::FRAC_PI_3],
            ),
            decision_period_steps: 10,
            cross_track_gain: 0.5,
            heading_gain: 1.0,
        }
    }
}

/// Settled means close enough to the tracked centerline to contemplate the
/// next lane change.
const SETTLED_LATERAL_M: f64 = 0.3;
const SETTLED_HEADING_RAD: f64 = 0.05;

#[derive(Clone, Debug)]
pub struct SurrogateDriver {
    pub cfg: SurrogateConfig,
    target_lane: Option<LaneId>,
    cooldown: u64,
}

impl SurrogateDriver {
    pub fn new(cfg: SurrogateConfig) -> Self {
        Self {
            cfg,
            target_lane: None,
            cooldown: 0,
        }
    }

    pub fn target_lane(&self) -> Option<LaneId> {
        self.target_lane
    }

    /// Control for one step. A vehicle that has left the road gets a
    /// straight-wheel comfortable brake instead of an error so that
    /// surrounding traffic can keep stepping.
    pub fn act(&mut self, world: &WorldState, me: VehicleId) -> ControlAction {
        let Ok(state) = world.require_vehicle(me) else {
            return ControlAction::default();
        };
        let current = match state.lane {
            Some(l) => l,
            None => {
                self.target_lane = None;
                return self.cfg.bounds.clamp(ControlAction {
                    accel: -self.cfg.idm.comfort_braking,
                    steering: 0.0,
                });
            }
        };
        let road = world.road.as_ref();

        // Reset tracking if the target is gone or no longer reachable.
        let target_ok = self.target_lane.is_some_and(|t| {
            t == current || road.are_adjacent(t, current)
        });
        if !target_ok {
            self.target_lane = Some(current);
        }
        let mut target = self.target_lane.unwrap();

        let geometry = match road.lane(target) {
            Some(g) => g,
            None => return ControlAction::default(),
        };
        let proj = geometry.project(state.center());
        let heading_err = wrap_angle(state.heading - proj.heading);
        let settled =
            target == current && proj.lateral.abs() < SETTLED_LATERAL_M && heading_err.abs() < SETTLED_HEADING_RAD;

        self.cooldown = self.cooldown.saturating_sub(1);
        if settled && self.cooldown == 0 {
            if let Ok(decision) = mobil_decide(world, me, &self.cfg.idm, &self.cfg.mobil) {
                let side = match decision {
                    LaneChangeDecision::Keep => None,
                    LaneChangeDecision::Left => road.lane(current).and_then(|l| l.left),
                    LaneChangeDecision::Right => road.lane(current).and_then(|l| l.right),
                };
                if let Some(next) = side {
                    self.target_lane = Some(next);
                    target = next;
                    self.cooldown = self.cfg.decision_period_steps;
                }
            }
        }

        // Longitudinal: react to the current lane and, mid-change, also to
        // the target lane; the stricter of the two wins.
        let mut accel = accel_toward_lane_leader(world, current, state, &self.cfg.idm);
        if target != current {
            accel = accel.min(accel_toward_lane_leader(world, target, state, &self.cfg.idm));
        }

        let track = road.lane(target).map(|l| l.project(state.center())).unwrap_or(proj);
        let psi_err = wrap_angle(track.heading - state.heading);
        let cross = (self.cfg.cross_track_gain * -track.lateral / (state.speed + 1.0)).atan();
        let steering = self.cfg.heading_gain * psi_err + cross;

        self.cfg.bounds.clamp(ControlAction { accel, steering })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::road_spec::{build_road, RoadSpec};
    use natadv_sim::{step_world, SimConfig, VehicleState};
    use std::collections::HashMap;
    use std::sync::Arc;

    fn straight_world(vehicles: Vec<VehicleState>) -> WorldState {
        let road = build_road(&RoadSpec::straight_highway(2, 3.5, 2000.0, false)).unwrap();
        WorldState::new(Arc::new(road), vehicles, 0).unwrap()
    }

    fn run(
        mut world: WorldState,
        drivers: &mut HashMap<VehicleId, SurrogateDriver>,
        scripted: &HashMap<VehicleId, ControlAction>,
        steps: usize,
    ) -> Vec<WorldState> {
        let cfg = SimConfig::default();
        let mut states = vec![world.clone()];
        for _ in 0..steps {
            let mut actions: HashMap<VehicleId, ControlAction> = scripted.clone();
            for (id, driver) in drivers.iter_mut() {
                actions.insert(*id, driver.act(&world, *id));
            }
            let (next, _) = step_world(&world, &actions, &cfg);
            world = next;
            states.push(world.clone());
        }
        states
    }

    #[test]
    fn tracker_converges_to_the_centerline_without_divergence() {
        // Start a full lane-width off target, already assigned to lane 0.
        let ego = VehicleState::new(1, 50.0, -1.2, 0.0, 10.0);
        let world = straight_world(vec![ego]);
        let mut drivers = HashMap::from([(VehicleId(1), SurrogateDriver::new(SurrogateConfig::default()))]);
        let states = run(world, &mut drivers, &HashMap::new(), 80);
        let final_y = states.last().unwrap().vehicles[0].y;
        assert!(final_y.abs() < 0.1, "final y {final_y}");
        // No wild overshoot past the centerline.
        for s in &states {
            assert!(s.vehicles[0].y < 1.0 && s.vehicles[0].y > -2.0);
        }
    }

    #[test]
    fn follower_brakes_behind_a_slow_leader() {
        let ego = VehicleState::new(1, 50.0, 0.0, 0.0, 10.0);
        let leader = VehicleState::new(2, 65.0, 0.0, 0.0, 3.0);
        let world = straight_world(vec![ego, leader]);
        let mut driver = SurrogateDriver::new(SurrogateConfig {
            mobil: MobilParameters {
                // Make changing lanes unattractive so this stays a braking test.
                accel_gain_threshold: 1e9,
                ..MobilParameters::default()
            },
            ..SurrogateConfig::default()
        });
        let a = driver.act(&world, VehicleId(1));
        assert!(a.accel < -1.0, "accel {}", a.accel);
    }

    #[test]
    fn stuck_vehicle_changes_into_the_empty_lane() {
        // Ego in the right lane (lane 1) behind a crawler; lane 0 is free.
        let ego = VehicleState::new(1, 50.0, -3.5, 0.0, 10.0);
        let leader = VehicleState::new(2, 80.0, -3.5, 0.0, 4.0);
        let world = straight_world(vec![ego, leader]);
        let mut drivers = HashMap::from([(VehicleId(1), SurrogateDriver::new(SurrogateConfig::default()))]);
        let scripted = HashMap::from([(VehicleId(2), ControlAction::default())]);
        let states = run(world, &mut drivers, &scripted, 150);
        assert_eq!(drivers[&VehicleId(1)].target_lane(), Some(LaneId(0)));
        let final_state = states.last().unwrap();
        let ego_final = final_state.vehicle(VehicleId(1)).unwrap();
        assert_eq!(ego_final.lane, Some(LaneId(0)));
        assert!(ego_final.y > -1.0, "y {}", ego_final.y);
    }

    #[test]
    fn controller_is_deterministic() {
        let build = || {
            let ego = VehicleState::new(1, 50.0, -3.3, 0.02, 9.0);
            let leader = VehicleState::new(2, 90.0, -3.5, 0.0, 6.0);
            straight_world(vec![ego, leader])
        };
        let mut out = Vec::new();
        for _ in 0..2 {
            let mut drivers =
                HashMap::from([(VehicleId(1), SurrogateDriver::new(SurrogateConfig::default()))]);
            let scripted = HashMap::from([(VehicleId(2), ControlAction::default())]);
            let states = run(build(), &mut drivers, &scripted, 100);
            let v = &states.last().unwrap().vehicles[0];
            out.push((v.x.to_bits(), v.y.to_bits(), v.heading.to_bits(), v.speed.to_bits()));
        }
        assert_eq!(out[0], out[1]);
    }

    #[test]
    fn offroad_vehicle_coasts_to_a_stop_without_steering() {
        let mut ego = VehicleState::new(1, 50.0, 30.0, 0.0, 10.0);
        ego.lane = None;
        let road = build_road(&RoadSpec::straight_highway(2, 3.5, 2000.0, false)).unwrap();
        let world = WorldState::new(Arc::new(road), vec![ego], 0).unwrap();
        let mut driver = SurrogateDriver::new(SurrogateConfig::default());
        let a = driver.act(&world, VehicleId(1));
        assert_eq!(a.steering, 0.0);
        assert!(a.accel < 0.0);
    }
}
