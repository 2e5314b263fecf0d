//! Lane and leader annotation against a road network.
//!
//! Recomputes `lane`, `preceding`, and `space_headway` for every record from
//! geometry alone, so datasets without those columns (and synthetic corpora)
//! end up with the same annotations the screening pipeline expects.

use std::collections::HashMap;

use natadv_sim::{LaneId, RoadNetwork};

use crate::record::Episode;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AnnotateSummary {
    pub n_records: usize,
    /// Records farther than two lane widths from every centerline; their
    /// lane is cleared rather than guessed.
    pub n_offroad: usize,
    pub n_with_leader: usize,
}

/// Assigns each record the nearest lane (ties break toward the lower id),
/// then resolves per-frame, per-lane leaders by arclength order.
/// `space_headway` becomes the center-to-center arclength distance to the
/// leader. Running it twice is a no-op: annotations are recomputed from
/// positions, never read.
pub fn infer_lane_and_leader(episodes: &mut [Episode], road: &RoadNetwork) -> AnnotateSummary {
    let mut summary = AnnotateSummary::default();

    // (episode idx, record idx) -> (lane, arclength) for the frame pass.
    let mut placements: HashMap<(usize, usize), (LaneId, f64)> = HashMap::new();
    let mut by_frame: HashMap<u64, Vec<(usize, usize)>> = HashMap::new();

    for (ei, ep) in episodes.iter_mut().enumerate() {
        for (ri, rec) in ep.records.iter_mut().enumerate() {
            summary.n_records += 1;
            let (lane, proj) = road.nearest_lane([rec.x, rec.y]);
            let lane_id = lane.id;
            if proj.distance > 2.0 * lane.width {
                summary.n_offroad += 1;
                rec.lane = None;
                rec.preceding = None;
                rec.space_headway = None;
                continue;
            }
            rec.lane = Some(lane_id.0);
            rec.preceding = None;
            rec.space_headway = None;
            placements.insert((ei, ri), (lane_id, proj.s));
            by_frame.entry(rec.frame).or_default().push((ei, ri));
        }
    }

    for keys in by_frame.values() {
        for &(ei, ri) in keys {
            let (lane, s) = placements[&(ei, ri)];
            let mut best: Option<(f64, usize, usize)> = None;
            for &(ej, rj) in keys {
                if (ej, rj) == (ei, ri) {
                    continue;
                }
                let (other_lane, other_s) = placements[&(ej, rj)];
                if other_lane != lane || other_s <= s {
                    continue;
                }
                let closer = match best {
                    None => true,
                    Some((bs, ..)) => other_s < bs,
                };
                if closer {
                    best = Some((other_s, ej, rj));
                }
            }
            if let Some((lead_s, ej, rj)) = best {
                let leader_id = episodes[ej].records[rj].vehicle_id;
                let rec = &mut episodes[ei].records[ri];
                rec.preceding = Some(leader_id);
                rec.space_headway = Some(lead_s - s);
                summary.n_with_leader += 1;
            }
        }
    }

    summary
}
