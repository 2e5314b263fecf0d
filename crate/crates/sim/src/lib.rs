//! Minimal 2-D traffic simulation kernel.
//!
//! Vehicles are oriented rectangles driven by a kinematic bicycle model on a
//! lane-based road network. The kernel steps whole worlds synchronously,
//! detects collisions between vehicle bodies, classifies contact geometry,
//! and reports episode termination. Everything is `f64` and deterministic:
//! stepping a world twice from the same state yields bit-identical results.

mod collision;
mod error;
mod features;
mod road;
pub mod scenario_log;
mod vehicle;
mod world;

pub use collision::{detect_collision, separation_margin, CollisionEvent, ContactSide};
pub use error::SimError;
pub use features::{relative_features, REL_FEATURE_DIM};
pub use road::{Lane, LaneId, LaneKind, LaneProjection, RoadNetwork};
pub use vehicle::{ActionBounds, ControlAction, VehicleId, VehicleState, DEFAULT_LENGTH, DEFAULT_WIDTH};
pub use world::{episode_done, neighbors, step_vehicle, step_world, SimConfig, Termination, WorldState};

use std::f64::consts::PI;

/// Wraps an angle to the half-open interval (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}
