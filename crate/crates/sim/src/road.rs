use serde::{Deserialize, Serialize};

use crate::error::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LaneId(pub u32);

impl std::fmt::Display for LaneId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaneKind {
    Mainline,
    Auxiliary,
    Ramp,
}

/// Result of projecting a point onto a lane centerline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneProjection {
    /// Arclength along the centerline of the closest point, clamped to the
    /// lane extent.
    pub s: f64,
    /// Signed perpendicular offset from the centerline; positive to the left
    /// of the direction of travel.
    pub lateral: f64,
    /// Euclidean distance to the closest centerline point. Equals
    /// `lateral.abs()` between the lane ends, larger beyond them.
    pub distance: f64,
    /// Direction of travel at the closest point, radians.
    pub heading: f64,
}

/// One lane: a polyline centerline with a constant width and optional
/// neighbors. Lateral position is measured from the centerline, so a point
/// is on the lane when its distance is within half the width.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lane {
    pub id: LaneId,
    pub kind: LaneKind,
    pub width: f64,
    pub centerline: Vec<[f64; 2]>,
    pub left: Option<LaneId>,
    pub right: Option<LaneId>,
    #[serde(skip)]
    cum_s: Vec<f64>,
}

impl Lane {
    pub fn new(id: u32, kind: LaneKind, width: f64, centerline: Vec<[f64; 2]>) -> Result<Self, SimError> {
        if !(width > 0.0) {
            return Err(SimError::InvalidLane(id, format!("width {width} must be positive")));
        }
        if centerline.len() < 2 {
            return Err(SimError::InvalidLane(id, "centerline needs at least 2 points".into()));
        }
        let mut lane = Self {
            id: LaneId(id),
            kind,
            width,
            centerline,
            left: None,
            right: None,
            cum_s: Vec::new(),
        };
        lane.rebuild_arclength()?;
        Ok(lane)
    }

    pub fn with_neighbors(mut self, left: Option<LaneId>, right: Option<LaneId>) -> Self {
        self.left = left;
        self.right = right;
        self
    }

    fn rebuild_arclength(&mut self) -> Result<(), SimError> {
        self.cum_s = Vec::with_capacity(self.centerline.len());
        let mut s = 0.0;
        self.cum_s.push(0.0);
        for w in self.centerline.windows(2) {
            let d = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
            if !(d > 0.0) {
                return Err(SimError::InvalidLane(self.id.0, "repeated centerline point".into()));
            }
            s += d;
            self.cum_s.push(s);
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        *self.cum_s.last().expect("validated centerline")
    }

    /// Closest-point projection onto the centerline polyline.
    pub fn project(&self, p: [f64; 2]) -> LaneProjection {
        let mut best = LaneProjection {
            s: 0.0,
            lateral: 0.0,
            distance: f64::INFINITY,
            heading: 0.0,
        };
        for (i, w) in self.centerline.windows(2).enumerate() {
            let [ax, ay] = w[0];
            let [bx, by] = w[1];
            let (dx, dy) = (bx - ax, by - ay);
            let len2 = dx * dx + dy * dy;
            let t = (((p[0] - ax) * dx + (p[1] - ay) * dy) / len2).clamp(0.0, 1.0);
            let (qx, qy) = (ax + t * dx, ay + t * dy);
            let dist = (p[0] - qx).hypot(p[1] - qy);
            if dist < best.distance {
                let inv_len = len2.sqrt().recip();
                // z of cross(direction, p - q): positive to the left of travel
                let lateral = (dx * (p[1] - qy) - dy * (p[0] - qx)) * inv_len;
                best = LaneProjection {
                    s: self.cum_s[i] + t * len2.sqrt(),
                    lateral,
                    distance: dist,
                    heading: dy.atan2(dx),
                };
            }
        }
        best
    }

    /// Whether a point lies within the lane's own half-width corridor.
    pub fn covers(&self, p: [f64; 2]) -> bool {
        self.project(p).distance <= self.width * 0.5 + 1e-9
    }
}

/// Immutable set of lanes with symmetric left/right adjacency.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoadNetwork {
    lanes: Vec<Lane>,
}

impl RoadNetwork {
    pub fn new(mut lanes: Vec<Lane>) -> Result<Self, SimError> {
        if lanes.is_empty() {
            return Err(SimError::EmptyRoad);
        }
        lanes.sort_by_key(|l| l.id);
        for w in lanes.windows(2) {
            if w[0].id == w[1].id {
                return Err(SimError::DuplicateLane(w[0].id.0));
            }
        }
        for lane in &lanes {
            if lane.cum_s.is_empty() {
                return Err(SimError::InvalidLane(lane.id.0, "missing arclength table".into()));
            }
            for (nb, back) in [(lane.left, false), (lane.right, true)] {
                if let Some(nb) = nb {
                    let other = lanes
                        .iter()
                        .find(|l| l.id == nb)
                        .ok_or(SimError::AsymmetricAdjacency(lane.id.0, nb.0))?;
                    let mirrored = if back { other.left } else { other.right };
                    if mirrored != Some(lane.id) {
                        return Err(SimError::AsymmetricAdjacency(lane.id.0, nb.0));
                    }
                }
            }
        }
        Ok(Self { lanes })
    }

    /// Parallel straight lanes along +x. Lane 0 runs on y = 0 and ids grow to
    /// the right (decreasing y), matching highway numbering from the median.
    pub fn straight(n_lanes: u32, width: f64, length: f64) -> Self {
        let lanes = (0..n_lanes)
            .map(|i| {
                let y = -(i as f64) * width;
                let left = (i > 0).then(|| LaneId(i - 1));
                let right = (i + 1 < n_lanes).then(|| LaneId(i + 1));
                Lane::new(i, LaneKind::Mainline, width, vec![[0.0, y], [length, y]])
                    .expect("straight lane is valid")
                    .with_neighbors(left, right)
            })
            .collect();
        Self::new(lanes).expect("straight road is valid")
    }

    pub fn lanes(&self) -> &[Lane] {
        &self.lanes
    }

    pub fn lane(&self, id: LaneId) -> Option<&Lane> {
        self.lanes.iter().find(|l| l.id == id)
    }

    pub fn max_lane_id(&self) -> LaneId {
        self.lanes.last().expect("non-empty").id
    }

    /// Lane whose centerline is closest to `p`, with the projection.
    /// Ties go to the lower lane id.
    pub fn nearest_lane(&self, p: [f64; 2]) -> (&Lane, LaneProjection) {
        let mut best: Option<(&Lane, LaneProjection)> = None;
        for lane in &self.lanes {
            let proj = lane.project(p);
            match &best {
                Some((_, b)) if proj.distance >= b.distance => {}
                _ => best = Some((lane, proj)),
            }
        }
        best.expect("non-empty road")
    }

    /// Lane containing `p`, or None when the point is off every lane's
    /// corridor (off-road).
    pub fn locate(&self, p: [f64; 2]) -> Option<(LaneId, LaneProjection)> {
        let (lane, proj) = self.nearest_lane(p);
        (proj.distance <= lane.width * 0.5 + 1e-9).then_some((lane.id, proj))
    }

    pub fn are_adjacent(&self, a: LaneId, b: LaneId) -> bool {
        self.lane(a)
            .map(|l| l.left == Some(b) || l.right == Some(b))
            .unwrap_or(false)
    }
}
