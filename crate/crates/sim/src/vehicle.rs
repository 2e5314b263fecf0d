use serde::{Deserialize, Serialize};

use crate::road::LaneId;

/// Default vehicle footprint, meters.
pub const DEFAULT_LENGTH: f64 = 5.0;
pub const DEFAULT_WIDTH: f64 = 2.0;

/// Stable vehicle identifier, unique within a world.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VehicleId(pub u64);

impl std::fmt::Display for VehicleId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Pose and body of one vehicle. Position is the body center, heading is
/// radians counterclockwise from +x, speed is along the heading and never
/// negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: VehicleId,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub length: f64,
    pub width: f64,
    pub lane: Option<LaneId>,
}

impl VehicleState {
    /// New vehicle with the default 5.0 x 2.0 m footprint and no lane.
    pub fn new(id: u64, x: f64, y: f64, heading: f64, speed: f64) -> Self {
        Self {
            id: VehicleId(id),
            x,
            y,
            heading,
            speed,
            length: DEFAULT_LENGTH,
            width: DEFAULT_WIDTH,
            lane: None,
        }
    }

    pub fn with_body(mut self, length: f64, width: f64) -> Self {
        self.length = length;
        self.width = width;
        self
    }

    pub fn with_lane(mut self, lane: LaneId) -> Self {
        self.lane = Some(lane);
        self
    }

    /// Velocity vector in world coordinates.
    pub fn velocity(&self) -> [f64; 2] {
        [self.speed * self.heading.cos(), self.speed * self.heading.sin()]
    }

    pub fn center(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn distance_to(&self, other: &VehicleState) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// One step of control input.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlAction {
    /// Longitudinal acceleration, m/s^2.
    pub accel: f64,
    /// Front wheel steering angle, radians.
    pub steering: f64,
}

impl ControlAction {
    pub fn new(accel: f64, steering: f64) -> Self {
        Self { accel, steering }
    }
}

/// Box constraints on control inputs, `[min, max]` per channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionBounds {
    pub accel: [f64; 2],
    pub steering: [f64; 2],
}

impl ActionBounds {
    pub fn new(accel: [f64; 2], steering: [f64; 2]) -> Self {
        debug_assert!(accel[0] <= accel[1] && steering[0] <= steering[1]);
        Self { accel, steering }
    }

    pub fn clamp(&self, action: ControlAction) -> ControlAction {
        ControlAction {
            accel: action.accel.clamp(self.accel[0], self.accel[1]),
            steering: action.steering.clamp(self.steering[0], self.steering[1]),
        }
    }

    pub fn contains(&self, action: ControlAction) -> bool {
        action.accel >= self.accel[0]
            && action.accel <= self.accel[1]
            && action.steering >= self.steering[0]
            && action.steering <= self.steering[1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_clamp_each_channel() {
        let b = ActionBounds::new([-5.0, 3.0], [-0.5, 0.5]);
        let c = b.clamp(ControlAction::new(10.0, -2.0));
        assert_eq!(c, ControlAction::new(3.0, -0.5));
        assert!(b.contains(c));
        assert!(!b.contains(ControlAction::new(3.1, 0.0)));
        let inside = ControlAction::new(-1.25, 0.25);
        assert_eq!(b.clamp(inside), inside);
    }
}
