use crate::vehicle::VehicleState;
use crate::wrap_angle;

/// Length of the per-vehicle relative feature vector.
pub const REL_FEATURE_DIM: usize = 5;

/// Relative state of `other` expressed in `ego`'s body frame:
/// `[lateral distance, longitudinal distance, lateral speed, longitudinal
/// speed, relative heading]`. Longitudinal is along ego's heading, lateral is
/// positive to ego's left, and the relative heading is wrapped to (-pi, pi].
pub fn relative_features(ego: &VehicleState, other: &VehicleState) -> [f64; REL_FEATURE_DIM] {
    let (sin_h, cos_h) = ego.heading.sin_cos();
    let dx = other.x - ego.x;
    let dy = other.y - ego.y;
    let lon = dx * cos_h + dy * sin_h;
    let lat = -dx * sin_h + dy * cos_h;
    let [vx_e, vy_e] = ego.velocity();
    let [vx_o, vy_o] = other.velocity();
    let (dvx, dvy) = (vx_o - vx_e, vy_o - vy_e);
    let v_lon = dvx * cos_h + dvy * sin_h;
    let v_lat = -dvx * sin_h + dvy * cos_h;
    [lat, lon, v_lat, v_lon, wrap_angle(other.heading - ego.heading)]
}
