//! MOBIL lane-change criterion on top of IDM accelerations.

use serde::{Deserialize, Serialize};

use natadv_sim::{LaneId, RoadNetwork, VehicleId, VehicleState, WorldState};

use crate::error::TrafficError;
use crate::idm::{idm_acceleration, IdmParameters};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MobilParameters {
    /// Politeness factor p weighing follower gains.
    pub politeness: f64,
    /// Minimum total gain (m/s^2) before a change is worthwhile; strict.
    pub accel_gain_threshold: f64,
    /// Largest deceleration (positive, m/s^2) a change may impose on the
    /// new follower; the boundary itself is still safe.
    pub max_braking_imposed: f64,
}

impl Default for MobilParameters {
    fn default() -> Self {
        Self {
            politeness: 0.5,
            accel_gain_threshold: 0.2,
            max_braking_imposed: 2.0,
        }
    }
}

/// IDM accelerations of the three affected parties before and after a
/// prospective change: ego (c), the follower in the target lane (n), and the
/// follower left behind in the current lane (o).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AccelContext {
    pub ego_before: f64,
    pub ego_after: f64,
    pub new_follower_before: f64,
    pub new_follower_after: f64,
    pub old_follower_before: f64,
    pub old_follower_after: f64,
}

/// Safety criterion: the new follower may not be forced below the braking
/// bound. Exactly at the bound is safe.
pub fn mobil_safety(new_follower_after: f64, p: &MobilParameters) -> bool {
    new_follower_after >= -p.max_braking_imposed
}

/// Incentive gain (ego improvement plus politeness-weighted follower
/// changes). A change is warranted only when this strictly exceeds the
/// threshold.
pub fn mobil_incentive(ctx: &AccelContext, p: &MobilParameters) -> f64 {
    (ctx.ego_after - ctx.ego_before)
        + p.politeness
            * ((ctx.new_follower_after - ctx.new_follower_before)
                + (ctx.old_follower_after - ctx.old_follower_before))
}

pub fn is_incentivized(gain: f64, p: &MobilParameters) -> bool {
    gain > p.accel_gain_threshold
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaneChangeDecision {
    Keep,
    Left,
    Right,
}

/// Stand-in acceleration for a hypothetical arrangement where bumpers
/// already overlap: hard enough to fail any safety bound, finite so gains
/// stay well defined.
const OVERLAP_BRAKE: f64 = -1e3;

fn accel_or_brake(v: f64, leader: Option<(f64, f64)>, idm: &IdmParameters) -> f64 {
    match leader {
        None => idm_acceleration(v, 0.0, f64::INFINITY, idm).unwrap(),
        Some((v_lead, gap)) => {
            if gap <= 0.0 {
                OVERLAP_BRAKE
            } else {
                idm_acceleration(v, v - v_lead, gap, idm).unwrap()
            }
        }
    }
}

fn bumper_gap(rear: &VehicleState, rear_s: f64, front: &VehicleState, front_s: f64) -> f64 {
    front_s - rear_s - 0.5 * (front.length + rear.length)
}

struct LaneNeighbors<'a> {
    leader: Option<(&'a VehicleState, f64)>,
    follower: Option<(&'a VehicleState, f64)>,
}

/// Nearest occupants of `lane` ahead of and behind arclength `s`, skipping
/// `exclude`. Vehicles are keyed by their assigned lane.
fn lane_neighbors<'a>(
    world: &'a WorldState,
    road: &RoadNetwork,
    lane: LaneId,
    s: f64,
    exclude: VehicleId,
) -> LaneNeighbors<'a> {
    let geometry = road.lane(lane).expect("lane ids come from the road itself");
    let mut leader: Option<(&VehicleState, f64)> = None;
    let mut follower: Option<(&VehicleState, f64)> = None;
    for v in &world.vehicles {
        if v.id == exclude || v.lane != Some(lane) {
            continue;
        }
        let vs = geometry.project(v.center()).s;
        if vs > s {
            if leader.map_or(true, |(_, best)| vs < best) {
                leader = Some((v, vs));
            }
        } else if vs < s && follower.map_or(true, |(_, best)| vs > best) {
            follower = Some((v, vs));
        }
    }
    LaneNeighbors { leader, follower }
}

fn follow_accel(ego: &VehicleState, ego_s: f64, ahead: Option<(&VehicleState, f64)>, idm: &IdmParameters) -> f64 {
    accel_or_brake(
        ego.speed,
        ahead.map(|(l, ls)| (l.speed, bumper_gap(ego, ego_s, l, ls))),
        idm,
    )
}

/// IDM acceleration `ego` would command while driving in `lane` right now,
/// reacting to that lane's nearest leader (free-road IDM if none).
pub fn accel_toward_lane_leader(
    world: &WorldState,
    lane: LaneId,
    ego: &VehicleState,
    idm: &IdmParameters,
) -> f64 {
    let road = world.road.as_ref();
    let Some(geometry) = road.lane(lane) else {
        return OVERLAP_BRAKE;
    };
    let s = geometry.project(ego.center()).s;
    let neighbors = lane_neighbors(world, road, lane, s, ego.id);
    follow_accel(ego, s, neighbors.leader, idm)
}

/// Evaluates one side; returns the gain when the move is safe and defined.
fn side_gain(
    world: &WorldState,
    road: &RoadNetwork,
    ego: &VehicleState,
    current: LaneId,
    target: LaneId,
    idm: &IdmParameters,
    mobil: &MobilParameters,
) -> Option<f64> {
    let cur_lane = road.lane(current)?;
    let tgt_lane = road.lane(target)?;
    let s_cur = cur_lane.project(ego.center()).s;
    let s_tgt = tgt_lane.project(ego.center()).s;

    let here = lane_neighbors(world, road, current, s_cur, ego.id);
    let there = lane_neighbors(world, road, target, s_tgt, ego.id);

    let mut ctx = AccelContext {
        ego_before: follow_accel(ego, s_cur, here.leader, idm),
        ego_after: follow_accel(ego, s_tgt, there.leader, idm),
        ..AccelContext::default()
    };

    if let Some((nf, nf_s)) = there.follower {
        ctx.new_follower_before = follow_accel(nf, nf_s, there.leader, idm);
        ctx.new_follower_after = accel_or_brake(
            nf.speed,
            Some((ego.speed, bumper_gap(nf, nf_s, ego, s_tgt))),
            idm,
        );
        if !mobil_safety(ctx.new_follower_after, mobil) {
            return None;
        }
    }

    if let Some((of, of_s)) = here.follower {
        ctx.old_follower_before = accel_or_brake(
            of.speed,
            Some((ego.speed, bumper_gap(of, of_s, ego, s_cur))),
            idm,
        );
        ctx.old_follower_after = follow_accel(of, of_s, here.leader, idm);
    }

    Some(mobil_incentive(&ctx, mobil))
}

/// Full MOBIL decision for one vehicle: evaluate both adjacent lanes, keep
/// the lane unless exactly one safe side clears the incentive threshold or
/// one side strictly dominates the other.
pub fn mobil_decide(
    world: &WorldState,
    ego: VehicleId,
    idm: &IdmParameters,
    mobil: &MobilParameters,
) -> Result<LaneChangeDecision, TrafficError> {
    let state = world.require_vehicle(ego)?;
    let current = state.lane.ok_or(TrafficError::NoLane(ego.0))?;
    let road = world.road.as_ref();
    let lane = road
        .lane(current)
        .ok_or(TrafficError::NoLane(ego.0))?;

    let eval = |target: Option<LaneId>| -> Option<f64> {
        let target = target?;
        let gain = side_gain(world, road, state, current, target, idm, mobil)?;
        is_incentivized(gain, mobil).then_some(gain)
    };
    let left = eval(lane.left);
    let right = eval(lane.right);

    Ok(match (left, right) {
        (None, None) => LaneChangeDecision::Keep,
        (Some(_), None) => LaneChangeDecision::Left,
        (None, Some(_)) => LaneChangeDecision::Right,
        (Some(l), Some(r)) => {
            if l > r {
                LaneChangeDecision::Left
            } else if r > l {
                LaneChangeDecision::Right
            } else {
                LaneChangeDecision::Keep
            }
        }
    })
}
