use serde::{Deserialize, Serialize};

use crate::features::relative_features;
use crate::vehicle::{VehicleId, VehicleState};

/// Which face of a vehicle's body rectangle took the contact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactSide {
    Front,
    Rear,
    Left,
    Right,
}

impl ContactSide {
    pub fn is_lateral(self) -> bool {
        matches!(self, ContactSide::Left | ContactSide::Right)
    }
}

/// Recorded contact between two vehicle bodies. All relative quantities are
/// expressed in vehicle `a`'s body frame as (lateral, longitudinal) pairs,
/// lateral positive to a's left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub step_index: u64,
    pub a: VehicleId,
    pub b: VehicleId,
    pub contact_sides: (ContactSide, ContactSide),
    /// b's heading minus a's heading, wrapped to (-pi, pi].
    pub relative_heading: f64,
    pub relative_position: [f64; 2],
    pub relative_velocity: [f64; 2],
}

impl CollisionEvent {
    pub fn involves(&self, id: VehicleId) -> bool {
        self.a == id || self.b == id
    }

    pub fn other(&self, id: VehicleId) -> Option<VehicleId> {
        if self.a == id {
            Some(self.b)
        } else if self.b == id {
            Some(self.a)
        } else {
            None
        }
    }
}

fn axes(v: &VehicleState) -> [[f64; 2]; 2] {
    let (s, c) = v.heading.sin_cos();
    [[c, s], [-s, c]]
}

/// Separating-axis margin between two body rectangles: the largest projection
/// gap over both bodies' axes. Positive means separated (by at least that
/// much along some axis), negative means overlapping interiors.
pub fn separation_margin(a: &VehicleState, b: &VehicleState) -> f64 {
    let [ua, wa] = axes(a);
    let [ub, wb] = axes(b);
    let d = [b.x - a.x, b.y - a.y];
    let mut margin = f64::NEG_INFINITY;
    for axis in [ua, wa, ub, wb] {
        let dot = |v: [f64; 2]| axis[0] * v[0] + axis[1] * v[1];
        let ra = 0.5 * a.length * dot(ua).abs() + 0.5 * a.width * dot(wa).abs();
        let rb = 0.5 * b.length * dot(ub).abs() + 0.5 * b.width * dot(wb).abs();
        let gap = dot(d).abs() - ra - rb;
        if gap > margin {
            margin = gap;
        }
    }
    margin
}

fn contact_side(lat: f64, lon: f64, half_len: f64, half_wid: f64) -> ContactSide {
    // normalized comparison so elongated bodies classify corners sensibly
    if lon.abs() * half_wid >= lat.abs() * half_len {
        if lon >= 0.0 {
            ContactSide::Front
        } else {
            ContactSide::Rear
        }
    } else if lat >= 0.0 {
        ContactSide::Left
    } else {
        ContactSide::Right
    }
}

/// Exact overlap test between two oriented body rectangles. Returns the
/// contact record when the interiors overlap, None otherwise.
pub fn detect_collision(step_index: u64, a: &VehicleState, b: &VehicleState) -> Option<CollisionEvent> {
    if separation_margin(a, b) >= 0.0 {
        return None;
    }
    let f_ab = relative_features(a, b);
    let f_ba = relative_features(b, a);
    let side_a = contact_side(f_ab[0], f_ab[1], 0.5 * a.length, 0.5 * a.width);
    let side_b = contact_side(f_ba[0], f_ba[1], 0.5 * b.length, 0.5 * b.width);
    Some(CollisionEvent {
        step_index,
        a: a.id,
        b: b.id,
        contact_sides: (side_a, side_b),
        relative_heading: f_ab[4],
        relative_position: [f_ab[0], f_ab[1]],
        relative_velocity: [f_ab[2], f_ab[3]],
    })
}
