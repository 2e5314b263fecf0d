//! Lane-change event extraction with follower context.
//!
//! Events anchor at a lane-id transition; the maneuver window around it is
//! grown while the heading relative to the lane direction stays above a
//! threshold. The accelerations of the ego and both affected followers just
//! before and just after the transition feed the lane-change calibration.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use natadv_sim::{wrap_angle, LaneId, RoadNetwork};

use crate::mobil::AccelContext;
use crate::record::Episode;

/// Headings within this many radians of the lane direction count as lane
/// keeping when growing the maneuver window.
pub const DEFAULT_HEADING_THRESHOLD: f64 = 0.02;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaneChangeEvent {
    pub vehicle_id: u64,
    /// First and last frame of the maneuver window.
    pub start_frame: u64,
    pub end_frame: u64,
    /// Last frame spent in the old lane.
    pub transition_frame: u64,
    pub from_lane: u32,
    pub to_lane: u32,
    /// Signed heading relative to the lane direction at its largest
    /// magnitude inside the window; negative means a rightward maneuver on
    /// a right-handed road frame.
    pub peak_heading: f64,
    pub context: AccelContext,
}

struct Track<'a> {
    episode: &'a Episode,
    accel: Vec<f64>,
    heading: Vec<f64>,
    frame_to_idx: HashMap<u64, usize>,
}

impl<'a> Track<'a> {
    fn build(episode: &'a Episode) -> Self {
        let n = episode.records.len();
        let mut heading = vec![0.0; n];
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
            heading[i] = if dx == 0.0 && dy == 0.0 { 0.0 } else { dy.atan2(dx) };
        }
        Self {
            episode,
            accel: episode.accel_series(),
            heading,
            frame_to_idx: episode
                .records
                .iter()
                .enumerate()
                .map(|(i, r)| (r.frame, i))
                .collect(),
        }
    }

    fn accel_at_frame(&self, frame: u64) -> Option<f64> {
        self.frame_to_idx.get(&frame).map(|&i| self.accel[i])
    }
}

/// Heading of each record relative to its lane's local direction; `None`
/// where the record has no lane.
fn relative_heading(track: &Track, road: &RoadNetwork, i: usize) -> Option<f64> {
    let rec = &track.episode.records[i];
    let lane = road.lane(LaneId(rec.lane?))?;
    let proj = lane.project([rec.x, rec.y]);
    Some(wrap_angle(track.heading[i] - proj.heading))
}

/// Extracts every lane-change event in the corpus. Context accelerations
/// read from the frames immediately before and after the transition;
/// followers that are absent on either frame contribute zeros.
pub fn extract_lane_change_events(
    episodes: &[Episode],
    road: &RoadNetwork,
    heading_threshold: f64,
) -> Vec<LaneChangeEvent> {
    let tracks: Vec<Track> = episodes.iter().map(Track::build).collect();
    let by_id: HashMap<u64, usize> = episodes
        .iter()
        .enumerate()
        .map(|(i, e)| (e.vehicle_id, i))
        .collect();

    // frame -> indices of tracks covering it.
    let mut frame_table: HashMap<u64, Vec<usize>> = HashMap::new();
    for (ti, ep) in episodes.iter().enumerate() {
        for r in &ep.records {
            frame_table.entry(r.frame).or_default().push(ti);
        }
    }

    let mut events = Vec::new();
    for (ti, track) in tracks.iter().enumerate() {
        let recs = &track.episode.records;
        for i in 0..recs.len().saturating_sub(1) {
            let (Some(from), Some(to)) = (recs[i].lane, recs[i + 1].lane) else {
                continue;
            };
            if from == to || recs[i + 1].frame != recs[i].frame + 1 {
                continue;
            }

            let above = |j: usize| {
                relative_heading(track, road, j)
                    .map(|h| h.abs() > heading_threshold)
                    .unwrap_or(false)
            };
            let mut start = i;
            while start > 0 && above(start) {
                start -= 1;
            }
            let mut end = i + 1;
            while end + 1 < recs.len() && above(end) {
                end += 1;
            }

            let peak_heading = (start..=end)
                .filter_map(|j| relative_heading(track, road, j))
                .max_by(|a, b| a.abs().total_cmp(&b.abs()))
                .unwrap_or(0.0);

            let context = follower_context(
                &tracks,
                &by_id,
                &frame_table,
                road,
                ti,
                i,
                from,
                to,
            );

            events.push(LaneChangeEvent {
                vehicle_id: track.episode.vehicle_id,
                start_frame: recs[start].frame,
                end_frame: recs[end].frame,
                transition_frame: recs[i].frame,
                from_lane: from,
                to_lane: to,
                peak_heading,
                context,
            });
        }
    }
    events.sort_by_key(|e| (e.vehicle_id, e.transition_frame));
    events
}

#[allow(clippy::too_many_arguments)]
fn follower_context(
    tracks: &[Track],
    by_id: &HashMap<u64, usize>,
    frame_table: &HashMap<u64, Vec<usize>>,
    road: &RoadNetwork,
    ego_track: usize,
    ego_idx: usize,
    from: u32,
    to: u32,
) -> AccelContext {
    let ego = &tracks[ego_track];
    let rec = &ego.episode.records[ego_idx];
    let frame = rec.frame;

    let mut ctx = AccelContext {
        ego_before: ego.accel[ego_idx],
        ego_after: ego.accel[ego_idx + 1],
        ..AccelContext::default()
    };

    let find_follower = |lane_id: u32| -> Option<u64> {
        let lane = road.lane(LaneId(lane_id))?;
        let ego_s = lane.project([rec.x, rec.y]).s;
        let mut best: Option<(f64, u64)> = None;
        for &ti in frame_table.get(&frame)?.iter() {
            if ti == ego_track {
                continue;
            }
            let t = &tracks[ti];
            let ri = t.frame_to_idx[&frame];
            let r = &t.episode.records[ri];
            if r.lane != Some(lane_id) {
                continue;
            }
            let s = lane.project([r.x, r.y]).s;
            if s < ego_s && best.map_or(true, |(bs, _)| s > bs) {
                best = Some((s, t.episode.vehicle_id));
            }
        }
        best.map(|(_, id)| id)
    };

    // Both followers must cover the before and after frames, otherwise the
    // pair contributes nothing to the incentive.
    let fill = |lane: u32, before_slot: &mut f64, after_slot: &mut f64| {
        if let Some(fid) = find_follower(lane) {
            let t = &tracks[by_id[&fid]];
            if let (Some(before), Some(after)) = (t.accel_at_frame(frame), t.accel_at_frame(frame + 1))
            {
                *before_slot = before;
                *after_slot = after;
            }
        }
    };
    fill(to, &mut ctx.new_follower_before, &mut ctx.new_follower_after);
    fill(from, &mut ctx.old_follower_before, &mut ctx.old_follower_after);
    ctx
}
