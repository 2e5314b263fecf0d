//! Car-following segment extraction.
//!
//! A segment is a maximal run of consecutive frames in which one ego keeps
//! one leader. Runs split wherever the leader changes, a frame is missing
//! from either track, or the ego loses its leader.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::record::Episode;

/// Body length assumed when a dataset does not report one.
pub const DEFAULT_VEHICLE_LENGTH: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarFollowingSample {
    /// Absolute time, frame * dt.
    pub t: f64,
    /// Ego position.
    pub x: f64,
    pub y: f64,
    /// Ego speed.
    pub v: f64,
    /// Ego acceleration.
    pub a: f64,
    /// Ego speed minus leader speed; positive when closing.
    pub dv: f64,
    /// Center-to-center distance to the leader.
    pub headway: f64,
    /// Bumper-to-bumper gap.
    pub gap: f64,
    pub leader_speed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarFollowingSegment {
    pub id: String,
    pub ego_id: u64,
    pub leader_id: u64,
    pub start_frame: u64,
    pub dt: f64,
    pub vehicle_class: Option<u8>,
    pub ego_length: f64,
    pub leader_length: f64,
    /// Any sample sits on a far-right / auxiliary / ramp lane.
    pub far_right: bool,
    /// The ego's lane id changes somewhere inside the run.
    pub has_lane_change: bool,
    pub samples: Vec<CarFollowingSample>,
}

impl CarFollowingSegment {
    /// Time covered, `(n - 1) * dt`.
    pub fn duration(&self) -> f64 {
        self.samples.len().saturating_sub(1) as f64 * self.dt
    }

    /// Ego path length over the run.
    pub fn travel(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|p| (p[1].x - p[0].x).hypot(p[1].y - p[0].y))
            .sum()
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.gap).collect()
    }

    /// Re-derives every bumper gap from the center headway and the two body
    /// lengths; returns how many came out non-positive.
    pub fn recompute_gaps(&mut self) -> usize {
        let offset = 0.5 * (self.ego_length + self.leader_length);
        let mut nonpositive = 0;
        for s in &mut self.samples {
            s.gap = s.headway - offset;
            if s.gap <= 0.0 {
                nonpositive += 1;
            }
        }
        nonpositive
    }
}

struct EpisodeIndex<'a> {
    episode: &'a Episode,
    frame_to_idx: HashMap<u64, usize>,
}

/// Extracts all car-following segments from an annotated corpus.
/// `far_right_lanes` lists the lane ids that count as far-right for
/// screening; segments touching them are flagged, not dropped.
pub fn extract_car_following(
    episodes: &[Episode],
    far_right_lanes: &HashSet<u32>,
) -> Vec<CarFollowingSegment> {
    let index: HashMap<u64, EpisodeIndex> = episodes
        .iter()
        .map(|ep| {
            let frame_to_idx = ep
                .records
                .iter()
                .enumerate()
                .map(|(i, r)| (r.frame, i))
                .collect();
            (ep.vehicle_id, EpisodeIndex { episode: ep, frame_to_idx })
        })
        .collect();

    let mut segments = Vec::new();
    for ego in episodes {
        let accel = ego.accel_series();
        let mut run: Vec<usize> = Vec::new();
        let mut run_leader: u64 = 0;
        let flush = |run: &mut Vec<usize>, leader: u64, segments: &mut Vec<CarFollowingSegment>| {
            if run.len() >= 2 {
                if let Some(li) = index.get(&leader) {
                    segments.push(build_segment(ego, &accel, run, leader, li, far_right_lanes));
                }
            }
            run.clear();
        };

        for (i, rec) in ego.records.iter().enumerate() {
            let leader = rec.preceding;
            let extends = match (leader, run.last()) {
                (Some(l), Some(&prev)) => {
                    l == run_leader && rec.frame == ego.records[prev].frame + 1
                }
                _ => false,
            };
            let leader_covers = leader
                .and_then(|l| index.get(&l))
                .is_some_and(|li| li.frame_to_idx.contains_key(&rec.frame));

            if !(extends && leader_covers) {
                flush(&mut run, run_leader, &mut segments);
            }
            if let Some(l) = leader {
                if leader_covers {
                    run_leader = l;
                    run.push(i);
                }
            }
        }
        flush(&mut run, run_leader, &mut segments);
    }
    segments
}

fn build_segment(
    ego: &Episode,
    ego_accel: &[f64],
    run: &[usize],
    leader_id: u64,
    leader: &EpisodeIndex,
    far_right_lanes: &HashSet<u32>,
) -> CarFollowingSegment {
    let first = &ego.records[run[0]];
    let ego_length = run
        .iter()
        .find_map(|&i| ego.records[i].length)
        .unwrap_or(DEFAULT_VEHICLE_LENGTH);
    let leader_length = leader
        .episode
        .records
        .iter()
        .find_map(|r| r.length)
        .unwrap_or(DEFAULT_VEHICLE_LENGTH);
    let vehicle_class = run.iter().find_map(|&i| ego.records[i].vehicle_class);

    let mut far_right = false;
    let mut has_lane_change = false;
    let mut prev_lane: Option<u32> = None;
    let mut samples = Vec::with_capacity(run.len());
    for &i in run {
        let rec = &ego.records[i];
        if let Some(l) = rec.lane {
            if far_right_lanes.contains(&l) {
                far_right = true;
            }
            if let Some(p) = prev_lane {
                if p != l {
                    has_lane_change = true;
                }
            }
            prev_lane = Some(l);
        }
        let li = leader.frame_to_idx[&rec.frame];
        let lrec = &leader.episode.records[li];
        let headway = rec
            .space_headway
            .unwrap_or_else(|| (lrec.x - rec.x).hypot(lrec.y - rec.y));
        samples.push(CarFollowingSample {
            t: rec.frame as f64 * ego.dt,
            x: rec.x,
            y: rec.y,
            v: rec.speed,
            a: ego_accel[i],
            dv: rec.speed - lrec.speed,
            headway,
            gap: headway - 0.5 * (ego_length + leader_length),
            leader_speed: lrec.speed,
        });
    }

    CarFollowingSegment {
        id: format!("{}-{}-{}", ego.vehicle_id, leader_id, first.frame),
        ego_id: ego.vehicle_id,
        leader_id,
        start_frame: first.frame,
        dt: ego.dt,
        vehicle_class,
        ego_length,
        leader_length,
        far_right,
        has_lane_change,
        samples,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::{Source, TrajectoryRecord};

    fn rec(id: u64, frame: u64, x: f64, speed: f64, preceding: Option<u64>) -> TrajectoryRecord {
        TrajectoryRecord {
            vehicle_id: id,
            frame,
            x,
            y: 0.0,
            speed,
            accel: Some(0.0),
            lane: Some(1),
            preceding,
            space_headway: preceding.map(|_| 30.0),
            vehicle_class: Some(2),
            length: Some(4.0),
            width: Some(2.0),
        }
    }

    fn ep(id: u64, recs: Vec<TrajectoryRecord>) -> Episode {
        Episode::new(id, Source::Canonical, 0.1, recs).unwrap()
    }

    fn extract(eps: &[Episode]) -> Vec<CarFollowingSegment> {
        extract_car_following(eps, &HashSet::new())
    }

    #[test]
    fn single_pair_yields_one_segment_with_correct_samples() {
        let leader = ep(2, (0..10).map(|f| rec(2, f, 40.0 + f as f64, 12.0, None)).collect());
        let egoep = ep(1, (0..10).map(|f| rec(1, f, 10.0 + f as f64, 10.0, Some(2))).collect());
        let segs = extract(&[egoep, leader]);
        assert_eq!(segs.len(), 1);
        let s = &segs[0];
        assert_eq!(s.id, "1-2-0");
        assert_eq!(s.samples.len(), 10);
        assert_eq!(s.samples[0].dv, -2.0);
        assert_eq!(s.samples[0].headway, 30.0);
        // 30 - (4 + 4) / 2
        assert_eq!(s.samples[0].gap, 26.0);
        assert!((s.samples[3].t - 0.3).abs() < 1e-12);
        assert!((s.duration() - 0.9).abs() < 1e-12);
        assert!((s.travel() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn leader_change_splits_the_run() {
        let l2 = ep(2, (0..10).map(|f| rec(2, f, 50.0, 10.0, None)).collect());
        let l3 = ep(3, (0..10).map(|f| rec(3, f, 60.0, 10.0, None)).collect());
        let egoep = ep(
            1,
            (0..10)
                .map(|f| rec(1, f, 10.0, 10.0, Some(if f < 5 { 2 } else { 3 })))
                .collect(),
        );
        let segs = extract(&[egoep, l2, l3]);
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].leader_id, 2);
        assert_eq!(segs[0].samples.len(), 5);
        assert_eq!(segs[1].leader_id, 3);
        assert_eq!(segs[1].start_frame, 5);
    }

    #[test]
    fn missing_ego_frame_splits_the_run() {
        let leader = ep(2, (0..11).map(|f| rec(2, f, 50.0, 10.0, None)).collect());
        let egoep = ep(
            1,
            (0..11)
                .filter(|f| *f != 5)
                .map(|f| rec(1, f, 10.0, 10.0, Some(2)))
                .collect(),
        );
        let segs = extract(&[egoep, leader]);
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].samples.len(), 5);
        assert_eq!(segs[1].samples.len(), 5);
    }

    #[test]
    fn frames_the_leader_track_misses_split_the_run() {
        let leader = ep(2, (0..10).filter(|f| *f != 4).map(|f| rec(2, f, 50.0, 10.0, None)).collect());
        let egoep = ep(1, (0..10).map(|f| rec(1, f, 10.0, 10.0, Some(2))).collect());
        let segs = extract(&[egoep, leader]);
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].samples.len(), 4);
        assert_eq!(segs[1].start_frame, 5);
    }

    #[test]
    fn leaderless_stretches_produce_nothing() {
        let egoep = ep(1, (0..10).map(|f| rec(1, f, 10.0, 10.0, None)).collect());
        assert!(extract(&[egoep]).is_empty());
    }

    #[test]
    fn unknown_leader_id_is_skipped() {
        let egoep = ep(1, (0..10).map(|f| rec(1, f, 10.0, 10.0, Some(99))).collect());
        assert!(extract(&[egoep]).is_empty());
    }

    #[test]
    fn far_right_and_lane_change_flags_are_set() {
        let leader = ep(2, (0..6).map(|f| rec(2, f, 50.0, 10.0, None)).collect());
        let mut rows: Vec<TrajectoryRecord> =
            (0..6).map(|f| rec(1, f, 10.0, 10.0, Some(2))).collect();
        for r in rows.iter_mut().skip(3) {
            r.lane = Some(4);
        }
        let egoep = ep(1, rows);
        let far: HashSet<u32> = [4].into();
        let segs = extract_car_following(&[egoep, leader], &far);
        assert_eq!(segs.len(), 1);
        assert!(segs[0].far_right);
        assert!(segs[0].has_lane_change);
    }

    #[test]
    fn missing_headway_falls_back_to_center_distance() {
        let leader = ep(2, (0..4).map(|f| rec(2, f, 37.0, 10.0, None)).collect());
        let mut rows: Vec<TrajectoryRecord> =
            (0..4).map(|f| rec(1, f, 10.0, 10.0, Some(2))).collect();
        for r in &mut rows {
            r.space_headway = None;
        }
        let egoep = ep(1, rows);
        let segs = extract(&[egoep, leader]);
        assert_eq!(segs[0].samples[0].headway, 27.0);
        assert_eq!(segs[0].samples[0].gap, 23.0);
    }

    #[test]
    fn recompute_gaps_counts_nonpositive() {
        let leader = ep(2, (0..4).map(|f| rec(2, f, 13.0, 10.0, None)).collect());
        let mut rows: Vec<TrajectoryRecord> =
            (0..4).map(|f| rec(1, f, 10.0, 10.0, Some(2))).collect();
        for r in &mut rows {
            r.space_headway = Some(3.0);
        }
        let egoep = ep(1, rows);
        let mut seg = extract(&[egoep, leader]).remove(0);
        // headway 3 against half-lengths 4: every gap is -1.
        assert_eq!(seg.recompute_gaps(), 4);
        assert_eq!(seg.samples[0].gap, -1.0);
    }
}
