//! Synthetic trajectory corpus for self-contained pipeline and calibration
//! runs: IDM platoons behind gently oscillating lane leaders, a couple of
//! scripted lane changers, optional measurement noise, and one truck so the
//! screening rules all have something to do.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::annotate::infer_lane_and_leader;
use crate::error::TrafficError;
use crate::idm::{idm_acceleration, idm_equilibrium_gap, IdmParameters};
use crate::record::{Episode, Source, TrajectoryRecord, CANONICAL_DT};
use crate::road_spec::{build_road, RoadSpec};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub lanes: u32,
    pub lane_width: f64,
    pub road_length: f64,
    /// Vehicles per lane including the scripted lane leader.
    pub vehicles_per_lane: u32,
    /// Simulation steps; the corpus covers `steps * dt` seconds.
    pub steps: usize,
    /// Driver model used by the followers (also the ground truth a
    /// calibration run should recover).
    pub idm: IdmParameters,
    /// Lane-leader speed profile: base + amplitude * sin(2 pi t / period).
    pub base_speed: f64,
    pub speed_amplitude: f64,
    pub speed_period_s: f64,
    /// Measurement noise added to recorded positions / speeds (std dev).
    pub position_noise_std: f64,
    pub speed_noise_std: f64,
    /// Extra vehicles that perform one scripted lane change each.
    pub n_lane_changers: u32,
    /// Make one follower a truck (class 3) to exercise the class rule.
    pub include_truck: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            lanes: 3,
            lane_width: 3.5,
            road_length: 700.0,
            vehicles_per_lane: 4,
            steps: 600,
            idm: IdmParameters::default(),
            base_speed: 8.0,
            speed_amplitude: 1.5,
            speed_period_s: 20.0,
            position_noise_std: 0.0,
            speed_noise_std: 0.0,
            n_lane_changers: 2,
            include_truck: true,
        }
    }
}

const CAR_LENGTH: f64 = 5.0;
const CAR_WIDTH: f64 = 2.0;
const TRUCK_LENGTH: f64 = 12.0;
const LANE_CHANGE_RAMP_S: f64 = 4.0;

struct SimVehicle {
    id: u64,
    class: u8,
    length: f64,
    scripted_lane: Option<u32>,
    /// Lane change script: (start time, from lane, to lane).
    change: Option<(f64, u32, u32)>,
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
    trace: Vec<(f64, f64, f64, f64)>, // x, y, speed, accel
}

/// Generates an annotated corpus and the matching road. Deterministic for a
/// fixed seed; noise only perturbs the recorded rows, never the dynamics.
pub fn generate_synthetic_corpus(
    cfg: &SynthConfig,
    seed: u64,
) -> Result<(Vec<Episode>, RoadSpec), TrafficError> {
    if cfg.lanes == 0 || cfg.vehicles_per_lane == 0 || cfg.steps < 2 {
        return Err(TrafficError::InvalidGeometry(
            "synthetic corpus needs at least one lane, one vehicle, and two steps".into(),
        ));
    }
    if cfg.base_speed >= cfg.idm.desired_speed {
        return Err(TrafficError::NonPositive {
            what: "desired speed margin (base_speed must stay below it)",
            value: cfg.idm.desired_speed - cfg.base_speed,
        });
    }
    let spec = RoadSpec::straight_highway(cfg.lanes, cfg.lane_width, cfg.road_length, false);
    let road = build_road(&spec)?;
    let dt = CANONICAL_DT;

    let eq_gap = idm_equilibrium_gap(cfg.base_speed, &cfg.idm).ok_or(TrafficError::NonPositive {
        what: "equilibrium gap",
        value: cfg.base_speed,
    })?;
    let spacing = eq_gap + CAR_LENGTH;
    let lane_y = |lane: u32| -(lane as f64) * cfg.lane_width;

    let mut vehicles: Vec<SimVehicle> = Vec::new();
    let mut next_id = 1u64;
    for lane in 0..cfg.lanes {
        for slot in 0..cfg.vehicles_per_lane {
            let truck = cfg.include_truck && lane == 0 && slot == 2;
            vehicles.push(SimVehicle {
                id: next_id,
                class: if truck { 3 } else { 2 },
                length: if truck { TRUCK_LENGTH } else { CAR_LENGTH },
                scripted_lane: (slot == 0).then_some(lane),
                change: None,
                x: 80.0 - slot as f64 * spacing,
                y: lane_y(lane),
                vx: cfg.base_speed,
                vy: 0.0,
                trace: Vec::with_capacity(cfg.steps + 1),
            });
            next_id += 1;
        }
    }
    let platoon_tail = 80.0 - (cfg.vehicles_per_lane - 1) as f64 * spacing;
    for c in 0..cfg.n_lane_changers {
        let from = c % cfg.lanes;
        let to = if from + 1 < cfg.lanes { from + 1 } else { from.saturating_sub(1) };
        vehicles.push(SimVehicle {
            id: next_id,
            class: 2,
            length: CAR_LENGTH,
            scripted_lane: None,
            change: Some((15.0 + 6.0 * c as f64, from, to)),
            x: platoon_tail - 20.0 - 8.0 * c as f64,
            y: lane_y(from),
            vx: cfg.base_speed,
            vy: 0.0,
            trace: Vec::with_capacity(cfg.steps + 1),
        });
        next_id += 1;
    }

    let omega = 2.0 * std::f64::consts::PI / cfg.speed_period_s;
    let lane_of = |y: f64| -> u32 {
        let idx = (-y / cfg.lane_width).round();
        idx.clamp(0.0, (cfg.lanes - 1) as f64) as u32
    };
    // Lateral offset of the lane-change ramp, tau in [0, ramp].
    let ramp_offset = |tau: f64| 0.5 * (1.0 - (std::f64::consts::PI * tau / LANE_CHANGE_RAMP_S).cos());
    let ramp_rate = |tau: f64| {
        0.5 * (std::f64::consts::PI / LANE_CHANGE_RAMP_S)
            * (std::f64::consts::PI * tau / LANE_CHANGE_RAMP_S).sin()
    };

    for step in 0..=cfg.steps {
        let t = step as f64 * dt;
        // Record, then advance.
        let snapshot: Vec<(u64, f64, f64, f64, u32)> = vehicles
            .iter()
            .map(|v| (v.id, v.x, v.y, v.vx, lane_of(v.y)))
            .collect();

        let mut accels = Vec::with_capacity(vehicles.len());
        for v in &vehicles {
            let accel = match (v.scripted_lane, v.change) {
                (Some(lane), _) => {
                    // Lane leader: follows the analytic speed profile.
                    let phase = 2.0 * std::f64::consts::PI * lane as f64 / cfg.lanes as f64;
                    cfg.speed_amplitude * omega * (omega * t + phase).cos()
                }
                (None, script) => {
                    let mut lanes_to_watch = vec![lane_of(v.y)];
                    if let Some((t0, _, to)) = script {
                        if t >= t0 && t <= t0 + LANE_CHANGE_RAMP_S {
                            lanes_to_watch.push(to);
                        }
                    }
                    let mut a = idm_acceleration(v.vx, 0.0, f64::INFINITY, &cfg.idm)
                        .unwrap_or(0.0);
                    for watch in lanes_to_watch {
                        let leader = snapshot
                            .iter()
                            .filter(|(id, x, y, ..)| {
                                *id != v.id && lane_of(*y) == watch && *x > v.x
                            })
                            .min_by(|a, b| a.1.total_cmp(&b.1));
                        if let Some(&(lid, lx, _, lvx, _)) = leader {
                            let llen = vehicles.iter().find(|o| o.id == lid).map(|o| o.length);
                            let gap = lx - v.x - 0.5 * (v.length + llen.unwrap_or(CAR_LENGTH));
                            let a_follow =
                                idm_acceleration(v.vx, v.vx - lvx, gap.max(0.01), &cfg.idm)
                                    .unwrap_or(-cfg.idm.max_accel);
                            a = a.min(a_follow);
                        }
                    }
                    a
                }
            };
            accels.push(accel);
        }

        for (v, &a) in vehicles.iter_mut().zip(&accels) {
            let speed = v.vx.hypot(v.vy);
            v.trace.push((v.x, v.y, speed, a));
            v.x += v.vx * dt;
            v.vx = (v.vx + a * dt).max(0.0);
            if let Some((t0, from, to)) = v.change {
                let tau = t - t0;
                if (0.0..=LANE_CHANGE_RAMP_S).contains(&tau) {
                    let dy = lane_y(to) - lane_y(from);
                    v.y = lane_y(from) + dy * ramp_offset(tau.min(LANE_CHANGE_RAMP_S));
                    v.vy = dy * ramp_rate(tau);
                } else if tau > LANE_CHANGE_RAMP_S {
                    v.y = lane_y(to);
                    v.vy = 0.0;
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut episodes = Vec::with_capacity(vehicles.len());
    for v in &vehicles {
        let records = v
            .trace
            .iter()
            .enumerate()
            .map(|(frame, &(x, y, speed, accel))| {
                let nx: f64 = rng.sample(StandardNormal);
                let ny: f64 = rng.sample(StandardNormal);
                let nv: f64 = rng.sample(StandardNormal);
                TrajectoryRecord {
                    vehicle_id: v.id,
                    frame: frame as u64,
                    x: x + cfg.position_noise_std * nx,
                    y: y + cfg.position_noise_std * ny,
                    speed: (speed + cfg.speed_noise_std * nv).max(0.0),
                    accel: Some(accel),
                    lane: None,
                    preceding: None,
                    space_headway: None,
                    vehicle_class: Some(v.class),
                    length: Some(v.length),
                    width: Some(CAR_WIDTH),
                }
            })
            .collect();
        episodes.push(Episode::new(v.id, Source::Canonical, dt, records)?);
    }
    infer_lane_and_leader(&mut episodes, &road);
    Ok((episodes, spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lane_change::{extract_lane_change_events, DEFAULT_HEADING_THRESHOLD};
    use crate::pipeline::{preprocess_corpus, PreprocessConfig};

    #[test]
    fn corpus_has_expected_population_and_annotations() {
        let cfg = SynthConfig::default();
        let (eps, spec) = generate_synthetic_corpus(&cfg, 7).unwrap();
        assert_eq!(eps.len(), (3 * 4 + 2) as usize);
        assert_eq!(spec.lanes.len(), 3);
        // Followers got leaders assigned by the annotation pass.
        let follower = &eps[1];
        let with_leader = follower.records.iter().filter(|r| r.preceding.is_some()).count();
        assert!(with_leader > 500, "only {with_leader} annotated frames");
        // One truck.
        let trucks = eps
            .iter()
            .filter(|e| e.records[0].vehicle_class == Some(3))
            .count();
        assert_eq!(trucks, 1);
    }

    #[test]
    fn corpus_survives_the_screening_pipeline() {
        let (mut eps, _) = generate_synthetic_corpus(&SynthConfig::default(), 7).unwrap();
        let out = preprocess_corpus(&mut eps, None, &PreprocessConfig::ngsim()).unwrap();
        assert!(out.summary.n_kept >= 4, "kept {}", out.summary.n_kept);
        // The far-right platoon and the truck leave tracks in the report.
        assert!(out.summary.rejects.contains_key("far_right_lane"), "{:?}", out.summary.rejects);
        assert!(out.summary.rejects.contains_key("vehicle_class"), "{:?}", out.summary.rejects);
        for seg in &out.segments {
            assert!(seg.samples.iter().all(|s| s.gap > 0.1));
            assert!(seg.samples.iter().all(|s| s.a.abs() < 8.0));
        }
    }

    #[test]
    fn scripted_changers_produce_lane_change_events() {
        let cfg = SynthConfig::default();
        let (eps, spec) = generate_synthetic_corpus(&cfg, 7).unwrap();
        let road = build_road(&spec).unwrap();
        let events = extract_lane_change_events(&eps, &road, DEFAULT_HEADING_THRESHOLD);
        assert!(events.len() >= 2, "found {} events", events.len());
        let changers: std::collections::HashSet<u64> = events.iter().map(|e| e.vehicle_id).collect();
        assert!(changers.contains(&13));
        assert!(changers.contains(&14));
    }

    #[test]
    fn generation_is_deterministic_and_noise_is_seeded() {
        let cfg = SynthConfig {
            position_noise_std: 0.05,
            speed_noise_std: 0.1,
            ..Default::default()
        };
        let (a, _) = generate_synthetic_corpus(&cfg, 3).unwrap();
        let (b, _) = generate_synthetic_corpus(&cfg, 3).unwrap();
        assert_eq!(a, b);
        let (c, _) = generate_synthetic_corpus(&cfg, 4).unwrap();
        assert!(a != c);
    }

    #[test]
    fn follower_speeds_track_the_leader_oscillation() {
        let (eps, _) = generate_synthetic_corpus(&SynthConfig::default(), 7).unwrap();
        // Vehicle 2 follows vehicle 1 in lane 0.
        let speeds: Vec<f64> = eps[1].records.iter().map(|r| r.speed).collect();
        let max = speeds.iter().cloned().fold(f64::MIN, f64::max);
        let min = speeds.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max > 8.5, "max speed {max}");
        assert!(min < 7.5, "min speed {min}");
        assert!(max < 11.0 && min > 4.0);
    }
}
