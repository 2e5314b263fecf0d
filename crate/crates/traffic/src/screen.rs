//! Ordered screening of car-following segments.
//!
//! Rules run in a fixed order and the first failure is the recorded reason,
//! so reject counts stay comparable across corpora.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::TrafficError;
use crate::segment::CarFollowingSegment;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreeningRules {
    /// Reject segments whose ego changes lane mid-run.
    pub exclude_lane_changes: bool,
    /// Minimum covered time, seconds. Checked again after trimming.
    pub min_duration_s: f64,
    /// Minimum ego path length, meters.
    pub min_travel_m: f64,
    /// Seconds cut from each end before the duration re-check.
    pub trim_s: f64,
    /// Reject segments that touch a far-right / auxiliary / ramp lane.
    pub exclude_far_right_lane: bool,
    /// Largest plausible |acceleration|, m/s^2.
    pub max_abs_accel: f64,
    /// Only this vehicle class is kept (2 = passenger car).
    pub required_class: u8,
    /// Smallest plausible bumper gap, meters.
    pub min_gap_m: f64,
}

impl ScreeningRules {
    /// Defaults for highway recordings: long tracks, ramp lanes present.
    pub fn ngsim() -> Self {
        Self {
            exclude_lane_changes: true,
            min_duration_s: 30.0,
            min_travel_m: 20.0,
            trim_s: 5.0,
            exclude_far_right_lane: true,
            max_abs_accel: 8.0,
            required_class: 2,
            min_gap_m: 0.1,
        }
    }

    /// Defaults for short intersection snippets: no ramp rule, 4 s floor.
    pub fn interaction() -> Self {
        Self {
            min_duration_s: 4.0,
            exclude_far_right_lane: false,
            ..Self::ngsim()
        }
    }

    /// Same rules with lane-changing segments retained, for building the
    /// lane-change corpus.
    pub fn keeping_lane_changes(mut self) -> Self {
        self.exclude_lane_changes = false;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    LaneChange,
    Duration,
    Travel,
    DurationAfterTrim,
    FarRightLane,
    AccelOutlier,
    VehicleClass,
    MinGap,
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::LaneChange => "lane_change",
            Self::Duration => "duration",
            Self::Travel => "travel",
            Self::DurationAfterTrim => "duration_after_trim",
            Self::FarRightLane => "far_right_lane",
            Self::AccelOutlier => "accel_outlier",
            Self::VehicleClass => "vehicle_class",
            Self::MinGap => "min_gap",
        };
        f.write_str(s)
    }
}

/// Screens one segment. `Ok` carries the trimmed segment; `Err` the first
/// rule it failed.
pub fn screen(
    segment: &CarFollowingSegment,
    rules: &ScreeningRules,
) -> Result<CarFollowingSegment, RejectReason> {
    if rules.exclude_lane_changes && segment.has_lane_change {
        return Err(RejectReason::LaneChange);
    }
    if segment.duration() < rules.min_duration_s {
        return Err(RejectReason::Duration);
    }
    if segment.travel() < rules.min_travel_m {
        return Err(RejectReason::Travel);
    }

    let trimmed = trim_segment(segment, rules.trim_s);
    if trimmed.duration() < rules.min_duration_s {
        return Err(RejectReason::DurationAfterTrim);
    }

    if rules.exclude_far_right_lane && segment.far_right {
        return Err(RejectReason::FarRightLane);
    }
    if trimmed.samples.iter().any(|s| s.a.abs() > rules.max_abs_accel) {
        return Err(RejectReason::AccelOutlier);
    }
    if segment.vehicle_class != Some(rules.required_class) {
        return Err(RejectReason::VehicleClass);
    }
    if trimmed.samples.iter().any(|s| s.gap < rules.min_gap_m) {
        return Err(RejectReason::MinGap);
    }
    Ok(trimmed)
}

/// Drops `trim_s` seconds from each end of a segment.
pub fn trim_segment(segment: &CarFollowingSegment, trim_s: f64) -> CarFollowingSegment {
    if trim_s <= 0.0 {
        return segment.clone();
    }
    let t0 = segment.samples.first().map(|s| s.t).unwrap_or(0.0);
    let t1 = segment.samples.last().map(|s| s.t).unwrap_or(0.0);
    let eps = 1e-9;
    let keep: Vec<_> = segment
        .samples
        .iter()
        .filter(|s| s.t >= t0 + trim_s - eps && s.t <= t1 - trim_s + eps)
        .copied()
        .collect();
    let mut out = segment.clone();
    out.start_frame += ((trim_s / segment.dt) + 0.5) as u64 * u64::from(!keep.is_empty());
    out.samples = keep;
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScreeningRow {
    pub segment_id: String,
    pub verdict: String,
    pub reason: String,
}

/// Screens a whole corpus; returns the kept (trimmed) segments plus one
/// report row per input segment, in input order.
pub fn screen_corpus(
    segments: &[CarFollowingSegment],
    rules: &ScreeningRules,
) -> (Vec<CarFollowingSegment>, Vec<ScreeningRow>) {
    let mut kept = Vec::new();
    let mut rows = Vec::with_capacity(segments.len());
    for seg in segments {
        match screen(seg, rules) {
            Ok(t) => {
                rows.push(ScreeningRow {
                    segment_id: seg.id.clone(),
                    verdict: "keep".into(),
                    reason: String::new(),
                });
                kept.push(t);
            }
            Err(reason) => rows.push(ScreeningRow {
                segment_id: seg.id.clone(),
                verdict: "reject".into(),
                reason: reason.to_string(),
            }),
        }
    }
    (kept, rows)
}

pub fn write_screening_report<W: Write>(writer: W, rows: &[ScreeningRow]) -> Result<(), TrafficError> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
