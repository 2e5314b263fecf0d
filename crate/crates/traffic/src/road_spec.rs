//! Declarative road descriptions and their conversion to simulation lanes.
//!
//! A road spec is JSON-friendly geometry: per lane, an ordered list of
//! straight and arc segments plus left/right neighbor ids. Arcs are
//! discretized densely enough that the polyline is geometrically faithful
//! (chord deviation at most 1 cm, arc length error well under 1 mm per 10 m).

use serde::{Deserialize, Serialize};

use natadv_sim::{Lane, LaneId, LaneKind, RoadNetwork};

use crate::error::TrafficError;

/// Largest angular step used when flattening arcs. 0.02 rad keeps the chord
/// deviation of a 200 m radius arc at 1 cm; tighter steps are used above
/// that radius.
pub const MAX_ARC_STEP_RAD: f64 = 0.02;

const MAX_CHORD_DEVIATION_M: f64 = 0.01;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoadSpec {
    pub lanes: Vec<LaneSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LaneSpec {
    pub id: u32,
    pub kind: LaneKind,
    pub width: f64,
    pub segments: Vec<GeomSegment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<u32>,
}

/// One piece of a lane centerline. Arcs run from `start_angle` to
/// `end_angle` (radians, counter-clockwise positive) around `center`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GeomSegment {
    Straight { start: [f64; 2], end: [f64; 2] },
    Arc {
        center: [f64; 2],
        radius: f64,
        start_angle: f64,
        end_angle: f64,
    },
}

impl GeomSegment {
    fn start_point(&self) -> [f64; 2] {
        match self {
            Self::Straight { start, .. } => *start,
            Self::Arc {
                center,
                radius,
                start_angle,
                ..
            } => [
                center[0] + radius * start_angle.cos(),
                center[1] + radius * start_angle.sin(),
            ],
        }
    }

    fn end_point(&self) -> [f64; 2] {
        match self {
            Self::Straight { end, .. } => *end,
            Self::Arc {
                center,
                radius,
                end_angle,
                ..
            } => [
                center[0] + radius * end_angle.cos(),
                center[1] + radius * end_angle.sin(),
            ],
        }
    }

    /// Polyline for this segment including both endpoints.
    fn sample(&self) -> Result<Vec<[f64; 2]>, TrafficError> {
        match self {
            Self::Straight { start, end } => {
                if start == end {
                    return Err(TrafficError::InvalidGeometry(
                        "straight segment has zero length".into(),
                    ));
                }
                Ok(vec![*start, *end])
            }
            Self::Arc {
                center,
                radius,
                start_angle,
                end_angle,
            } => {
                if *radius <= 0.0 {
                    return Err(TrafficError::InvalidGeometry(format!(
                        "arc radius must be positive, got {radius}"
                    )));
                }
                let sweep = end_angle - start_angle;
                if sweep == 0.0 {
                    return Err(TrafficError::InvalidGeometry("arc has zero sweep".into()));
                }
                // Chord deviation of one step t is r * (1 - cos(t/2)).
                let chord_cap = 2.0 * (1.0 - MAX_CHORD_DEVIATION_M / radius).max(-1.0).acos();
                let step = MAX_ARC_STEP_RAD.min(chord_cap);
                let n = (sweep.abs() / step).ceil().max(1.0) as usize;
                let mut pts = Vec::with_capacity(n + 1);
                for k in 0..=n {
                    let a = start_angle + sweep * (k as f64 / n as f64);
                    pts.push([center[0] + radius * a.cos(), center[1] + radius * a.sin()]);
                }
                Ok(pts)
            }
        }
    }
}

impl LaneSpec {
    /// Flattens the segment chain to a single centerline polyline. Segments
    /// must connect end-to-start (within 1 mm).
    pub fn centerline(&self) -> Result<Vec<[f64; 2]>, TrafficError> {
        if self.segments.is_empty() {
            return Err(TrafficError::InvalidGeometry(format!(
                "lane {} has no segments",
                self.id
            )));
        }
        for pair in self.segments.windows(2) {
            let e = pair[0].end_point();
            let s = pair[1].start_point();
            let gap = (e[0] - s[0]).hypot(e[1] - s[1]);
            if gap > 1e-3 {
                return Err(TrafficError::InvalidGeometry(format!(
                    "lane {}: segments disconnect by {gap:.4} m",
                    self.id
                )));
            }
        }
        let mut pts: Vec<[f64; 2]> = Vec::new();
        for seg in &self.segments {
            let sampled = seg.sample()?;
            let skip = usize::from(!pts.is_empty());
            pts.extend_from_slice(&sampled[skip..]);
        }
        Ok(pts)
    }
}

/// Builds a simulation road from a spec. Geometry and adjacency problems are
/// reported before any lane is constructed.
pub fn build_road(spec: &RoadSpec) -> Result<RoadNetwork, TrafficError> {
    let mut lanes = Vec::with_capacity(spec.lanes.len());
    for ls in &spec.lanes {
        let centerline = ls.centerline()?;
        let lane = Lane::new(ls.id, ls.kind, ls.width, centerline)
            .map_err(TrafficError::Sim)?
            .with_neighbors(ls.left.map(LaneId), ls.right.map(LaneId));
        lanes.push(lane);
    }
    RoadNetwork::new(lanes).map_err(TrafficError::Sim)
}

/// Parses a road spec from JSON text.
pub fn road_spec_from_json(text: &str) -> Result<RoadSpec, TrafficError> {
    Ok(serde_json::from_str(text)?)
}

impl RoadSpec {
    /// Straight multi-lane highway along +x. Lane 0 sits at y = 0; ids grow
    /// to the right (decreasing y). With `auxiliary`, one extra
    /// auxiliary-kind lane is appended on the far right.
    pub fn straight_highway(n_lanes: u32, lane_width: f64, length: f64, auxiliary: bool) -> Self {
        let total = n_lanes + u32::from(auxiliary);
        let lanes = (0..total)
            .map(|i| {
                let y = -(i as f64) * lane_width;
                LaneSpec {
                    id: i,
                    kind: if auxiliary && i == total - 1 {
                        LaneKind::Auxiliary
                    } else {
                        LaneKind::Mainline
                    },
                    width: lane_width,
                    segments: vec![GeomSegment::Straight {
                        start: [0.0, y],
                        end: [length, y],
                    }],
                    left: (i > 0).then(|| i - 1),
                    right: (i + 1 < total).then_some(i + 1),
                }
            })
            .collect();
        Self { lanes }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn polyline_length(pts: &[[f64; 2]]) -> f64 {
        pts.windows(2)
            .map(|p| (p[1][0] - p[0][0]).hypot(p[1][1] - p[0][1]))
            .sum()
    }

    #[test]
    fn quarter_arc_length_is_faithful() {
        let seg = GeomSegment::Arc {
            center: [0.0, 0.0],
            radius: 20.0,
            start_angle: 0.0,
            end_angle: std::f64::consts::FRAC_PI_2,
        };
        let pts = seg.sample().unwrap();
        let len = polyline_length(&pts);
        let exact = 10.0 * std::f64::consts::PI;
        assert!((len - exact).abs() < 1e-3, "len {len} vs {exact}");
    }

    #[test]
    fn arc_chords_deviate_less_than_a_centimeter() {
        for radius in [5.0, 20.0, 400.0] {
            let seg = GeomSegment::Arc {
                center: [3.0, -7.0],
                radius,
                start_angle: 0.3,
                end_angle: 2.4,
            };
            let pts = seg.sample().unwrap();
            for p in pts.windows(2) {
                let mid = [(p[0][0] + p[1][0]) / 2.0, (p[0][1] + p[1][1]) / 2.0];
                let d = (mid[0] - 3.0).hypot(mid[1] + 7.0);
                assert!(radius - d <= MAX_CHORD_DEVIATION_M + 1e-12);
            }
        }
    }

    #[test]
    fn clockwise_arcs_sample_in_travel_order() {
        let seg = GeomSegment::Arc {
            center: [0.0, 0.0],
            radius: 10.0,
            start_angle: std::f64::consts::FRAC_PI_2,
            end_angle: 0.0,
        };
        let pts = seg.sample().unwrap();
        assert!((pts[0][1] - 10.0).abs() < 1e-12);
        assert!((pts.last().unwrap()[0] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn disconnected_segments_are_rejected() {
        let lane = LaneSpec {
            id: 0,
            kind: LaneKind::Mainline,
            width: 3.5,
            segments: vec![
                GeomSegment::Straight { start: [0.0, 0.0], end: [10.0, 0.0] },
                GeomSegment::Straight { start: [10.5, 0.0], end: [20.0, 0.0] },
            ],
            left: None,
            right: None,
        };
        assert!(matches!(lane.centerline(), Err(TrafficError::InvalidGeometry(_))));
    }

    #[test]
    fn non_positive_radius_is_rejected() {
        let seg = GeomSegment::Arc {
            center: [0.0, 0.0],
            radius: 0.0,
            start_angle: 0.0,
            end_angle: 1.0,
        };
        assert!(matches!(seg.sample(), Err(TrafficError::InvalidGeometry(_))));
    }

    #[test]
    fn straight_with_arc_builds_continuous_lane() {
        let spec = RoadSpec {
            lanes: vec![LaneSpec {
                id: 0,
                kind: LaneKind::Mainline,
                width: 3.5,
                segments: vec![
                    GeomSegment::Straight { start: [-50.0, -20.0], end: [0.0, -20.0] },
                    GeomSegment::Arc {
                        center: [0.0, 0.0],
                        radius: 20.0,
                        start_angle: -std::f64::consts::FRAC_PI_2,
                        end_angle: 0.0,
                    },
                ],
                left: None,
                right: None,
            }],
        };
        let road = build_road(&spec).unwrap();
        let lane = road.lane(LaneId(0)).unwrap();
        let expected = 50.0 + 10.0 * std::f64::consts::PI;
        assert!((lane.length() - expected).abs() < 2e-3);
    }

    #[test]
    fn straight_highway_wires_neighbors_and_kinds() {
        let spec = RoadSpec::straight_highway(2, 3.5, 500.0, true);
        let road = build_road(&spec).unwrap();
        assert_eq!(road.lanes().len(), 3);
        assert!(road.are_adjacent(LaneId(0), LaneId(1)));
        assert!(road.are_adjacent(LaneId(1), LaneId(2)));
        assert!(!road.are_adjacent(LaneId(0), LaneId(2)));
        assert_eq!(road.lane(LaneId(2)).unwrap().kind, LaneKind::Auxiliary);
        // Lane 1 center sits one width to the right of lane 0.
        let p = road.lane(LaneId(1)).unwrap().project([100.0, -3.5]);
        assert!(p.lateral.abs() < 1e-9);
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = RoadSpec::straight_highway(3, 3.5, 650.0, false);
        let text = serde_json::to_string_pretty(&spec).unwrap();
        let back = road_spec_from_json(&text).unwrap();
        assert_eq!(back.lanes.len(), 3);
        let road = build_road(&back).unwrap();
        assert_eq!(road.max_lane_id(), LaneId(2));
    }
}
