//! End-to-end preprocessing: annotate, extract, screen, smooth, correct.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use natadv_sim::{LaneKind, RoadNetwork};

use crate::annotate::infer_lane_and_leader;
use crate::error::TrafficError;
use crate::record::Episode;
use crate::screen::{screen, trim_segment, ScreeningRow, ScreeningRules};
use crate::segment::{extract_car_following, CarFollowingSegment};
use crate::smooth::{correct_kinematics, sema_filter};

/// Time constant of the position smoother, seconds.
pub const DEFAULT_SMOOTHING_DELTA: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub rules: ScreeningRules,
    pub smoothing_delta: f64,
    /// Re-derive lane/leader annotations from the road before extraction.
    /// Required for sources that ship without those columns.
    pub annotate: bool,
}

impl PreprocessConfig {
    pub fn ngsim() -> Self {
        Self {
            rules: ScreeningRules::ngsim(),
            smoothing_delta: DEFAULT_SMOOTHING_DELTA,
            annotate: false,
        }
    }

    pub fn interaction() -> Self {
        Self {
            rules: ScreeningRules::interaction(),
            smoothing_delta: DEFAULT_SMOOTHING_DELTA,
            annotate: true,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct PreprocessSummary {
    pub n_episodes: usize,
    pub n_segments: usize,
    pub n_kept: usize,
    pub rejects: BTreeMap<String, usize>,
    /// Gaps that came out non-positive during correction, across kept
    /// segments (screening has already floored the usable ones).
    pub n_nonpositive_gaps: usize,
    pub n_offroad_records: usize,
}

#[derive(Clone, Debug)]
pub struct PreprocessOutput {
    pub segments: Vec<CarFollowingSegment>,
    pub report: Vec<ScreeningRow>,
    pub summary: PreprocessSummary,
}

/// Lane ids that count as far-right for screening: every auxiliary or ramp
/// lane, plus the highest-numbered lane.
pub fn far_right_lane_ids(road: &RoadNetwork) -> HashSet<u32> {
    let mut out: HashSet<u32> = road
        .lanes()
        .iter()
        .filter(|l| matches!(l.kind, LaneKind::Auxiliary | LaneKind::Ramp))
        .map(|l| l.id.0)
        .collect();
    out.insert(road.max_lane_id().0);
    out
}

/// Far-right set for corpora without road geometry: the highest lane id
/// observed in the data.
pub fn far_right_from_records(episodes: &[Episode]) -> HashSet<u32> {
    let lanes: HashSet<u32> = episodes
        .iter()
        .flat_map(|e| e.records.iter().filter_map(|r| r.lane))
        .collect();
    // A single observed lane is the whole road, not a shoulder lane.
    if lanes.len() < 2 {
        return HashSet::new();
    }
    lanes.iter().max().copied().into_iter().collect()
}

/// Smooths ego positions and the leader speed, then rebuilds speed,
/// acceleration, relative speed, and bumper gaps so the series are mutually
/// consistent. Returns the non-positive gap count.
pub fn smooth_segment(seg: &mut CarFollowingSegment, delta: f64) -> Result<usize, TrafficError> {
    let xs: Vec<f64> = seg.samples.iter().map(|s| s.x).collect();
    let ys: Vec<f64> = seg.samples.iter().map(|s| s.y).collect();
    let ls: Vec<f64> = seg.samples.iter().map(|s| s.leader_speed).collect();
    let xs = sema_filter(&xs, seg.dt, delta)?;
    let ys = sema_filter(&ys, seg.dt, delta)?;
    let ls = sema_filter(&ls, seg.dt, delta)?;
    let (v, a) = correct_kinematics(&xs, &ys, seg.dt)?;
    for (i, s) in seg.samples.iter_mut().enumerate() {
        s.x = xs[i];
        s.y = ys[i];
        s.leader_speed = ls[i];
        s.v = v[i];
        s.a = a[i];
        s.dv = v[i] - ls[i];
    }
    Ok(seg.recompute_gaps())
}

/// Runs the full pipeline over a corpus. With a road, annotations are
/// recomputed when the config asks for it and the far-right set comes from
/// lane kinds; without one, the far-right set falls back to raw lane ids.
pub fn preprocess_corpus(
    episodes: &mut [Episode],
    road: Option<&RoadNetwork>,
    cfg: &PreprocessConfig,
) -> Result<PreprocessOutput, TrafficError> {
    let mut summary = PreprocessSummary {
        n_episodes: episodes.len(),
        ..Default::default()
    };

    let far_right = match road {
        Some(r) => {
            if cfg.annotate {
                summary.n_offroad_records = infer_lane_and_leader(episodes, r).n_offroad;
            }
            far_right_lane_ids(r)
        }
        None => far_right_from_records(episodes),
    };

    let raw = extract_car_following(episodes, &far_right);
    summary.n_segments = raw.len();

    // Screening decides on raw data; kept segments are smoothed over their
    // full span and trimmed afterwards, so the trim also discards the
    // smoother's truncated-kernel ends.
    let mut kept = Vec::new();
    let mut report = Vec::with_capacity(raw.len());
    for seg in &raw {
        match screen(seg, &cfg.rules) {
            Ok(_) => {
                report.push(ScreeningRow {
                    segment_id: seg.id.clone(),
                    verdict: "keep".into(),
                    reason: String::new(),
                });
                let mut smoothed = seg.clone();
                summary.n_nonpositive_gaps += smooth_segment(&mut smoothed, cfg.smoothing_delta)?;
                kept.push(trim_segment(&smoothed, cfg.rules.trim_s));
            }
            Err(reason) => {
                *summary.rejects.entry(reason.to_string()).or_insert(0) += 1;
                report.push(ScreeningRow {
                    segment_id: seg.id.clone(),
                    verdict: "reject".into(),
                    reason: reason.to_string(),
                });
            }
        }
    }
    summary.n_kept = kept.len();

    Ok(PreprocessOutput {
        segments: kept,
        report,
        summary,
    })
}
