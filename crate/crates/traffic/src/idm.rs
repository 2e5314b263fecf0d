//! Intelligent Driver Model car following.

use serde::{Deserialize, Serialize};

use crate::error::TrafficError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdmParameters {
    /// Maximum acceleration a, m/s^2.
    pub max_accel: f64,
    /// Desired free-flow speed v0, m/s.
    pub desired_speed: f64,
    /// Free-acceleration exponent delta.
    pub accel_exponent: f64,
    /// Standstill jam distance s0, m.
    pub min_gap: f64,
    /// Comfortable braking deceleration b, m/s^2 (positive).
    pub comfort_braking: f64,
    /// Desired time headway T, s.
    pub time_headway: f64,
}

impl Default for IdmParameters {
    fn default() -> Self {
        Self {
            max_accel: 2.0,
            desired_speed: 10.0,
            accel_exponent: 4.0,
            min_gap: 1.0,
            comfort_braking: 1.0,
            time_headway: 0.5,
        }
    }
}

/// Box constraints for the calibrated parameters, as [lo, hi] pairs. The
/// exponent is not searched; it stays at the default.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdmRanges {
    pub max_accel: [f64; 2],
    pub desired_speed: [f64; 2],
    pub min_gap: [f64; 2],
    pub comfort_braking: [f64; 2],
    pub time_headway: [f64; 2],
}

impl Default for IdmRanges {
    fn default() -> Self {
        Self {
            max_accel: [0.1, 6.0],
            desired_speed: [1.0, 70.0],
            min_gap: [0.1, 8.0],
            comfort_braking: [0.1, 6.0],
            time_headway: [0.1, 5.0],
        }
    }
}

impl IdmRanges {
    pub fn as_array(&self) -> [[f64; 2]; 5] {
        [
            self.max_accel,
            self.desired_speed,
            self.min_gap,
            self.comfort_braking,
            self.time_headway,
        ]
    }

    pub fn params_from(&self, genes: &[f64; 5], accel_exponent: f64) -> IdmParameters {
        IdmParameters {
            max_accel: genes[0],
            desired_speed: genes[1],
            accel_exponent,
            min_gap: genes[2],
            comfort_braking: genes[3],
            time_headway: genes[4],
        }
    }
}

/// Desired dynamic gap s*(v, dv) = s0 + v T + v dv / (2 sqrt(a b)).
/// `dv` is ego speed minus leader speed, positive when closing.
pub fn idm_desired_gap(v: f64, dv: f64, p: &IdmParameters) -> f64 {
    p.min_gap + v * p.time_headway + v * dv / (2.0 * (p.max_accel * p.comfort_braking).sqrt())
}

/// IDM acceleration a [1 - (v/v0)^delta - (s*/gap)^2]. The gap must be
/// positive; pass `f64::INFINITY` for a free road.
pub fn idm_acceleration(v: f64, dv: f64, gap: f64, p: &IdmParameters) -> Result<f64, TrafficError> {
    if gap <= 0.0 {
        return Err(TrafficError::NonPositiveGap { value: gap });
    }
    let free = (v / p.desired_speed).powf(p.accel_exponent);
    let interaction = idm_desired_gap(v, dv, p) / gap;
    Ok(p.max_accel * (1.0 - free - interaction * interaction))
}

/// Steady-state gap at constant speed `v` on an infinite road: the gap where
/// idm_acceleration(v, 0, gap) = 0. Exists only below the desired speed.
pub fn idm_equilibrium_gap(v: f64, p: &IdmParameters) -> Option<f64> {
    if !(0.0..p.desired_speed).contains(&v) {
        return None;
    }
    let free = (v / p.desired_speed).powf(p.accel_exponent);
    Some(idm_desired_gap(v, 0.0, p) / (1.0 - free).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desired_gap_matches_hand_evaluation() {
        let p = IdmParameters::default();
        assert_eq!(idm_desired_gap(0.0, 0.0, &p), 1.0);
        // 1 + 10*0.5 + 10*2 / (2 sqrt(2)) = 6 + 5 sqrt(2)
        let expected = 6.0 + 5.0 * 2.0_f64.sqrt();
        assert_eq!(idm_desired_gap(10.0, 2.0, &p), expected);
        assert_eq!(expected, 13.071067811865475);
    }

    #[test]
    fn acceleration_matches_hand_evaluation() {
        let p = IdmParameters::default();
        // At desired speed with s* = 6 and gap 12: 2 (1 - 1 - 0.25).
        assert_eq!(idm_acceleration(10.0, 0.0, 12.0, &p).unwrap(), -0.5);
        // Gap exactly at s*: 2 (1 - 1 - 1) = -2.
        assert_eq!(idm_acceleration(10.0, 0.0, 6.0, &p).unwrap(), -2.0);
    }

    #[test]
    fn stationary_ego_with_huge_gap_accelerates_at_nearly_max() {
        let p = IdmParameters::default();
        let a = idm_acceleration(0.0, 0.0, 1e9, &p).unwrap();
        assert!((a - p.max_accel).abs() < 1e-12);
    }

    #[test]
    fn free_road_uses_only_the_speed_term() {
        let p = IdmParameters::default();
        let a = idm_acceleration(5.0, 0.0, f64::INFINITY, &p).unwrap();
        assert_eq!(a, 2.0 * (1.0 - (0.5_f64).powi(4)));
    }

    #[test]
    fn non_positive_gap_is_rejected() {
        let p = IdmParameters::default();
        assert!(idm_acceleration(10.0, 0.0, 0.0, &p).is_err());
        assert!(idm_acceleration(10.0, 0.0, -1.0, &p).is_err());
    }

    #[test]
    fn closing_fast_forces_strong_braking() {
        let p = IdmParameters::default();
        let a = idm_acceleration(10.0, 8.0, 10.0, &p).unwrap();
        assert!(a < -3.0);
    }

    #[test]
    fn equilibrium_gap_zeroes_the_acceleration() {
        let p = IdmParameters::default();
        let v = 8.0;
        let gap = idm_equilibrium_gap(v, &p).unwrap();
        // s*(8, 0) = 1 + 4 = 5; 1 - 0.8^4 = 0.5904; 5 / sqrt(0.5904)
        assert!((gap - 5.0 / 0.5904_f64.sqrt()).abs() < 1e-12);
        let a = idm_acceleration(v, 0.0, gap, &p).unwrap();
        assert!(a.abs() < 1e-12);
    }

    #[test]
    fn equilibrium_is_undefined_at_or_above_desired_speed() {
        let p = IdmParameters::default();
        assert_eq!(idm_equilibrium_gap(10.0, &p), None);
        assert_eq!(idm_equilibrium_gap(12.0, &p), None);
    }

    #[test]
    fn follower_at_equilibrium_stays_put_under_euler_stepping() {
        let p = IdmParameters::default();
        let v_lead = 8.0;
        let dt = 0.1;
        let mut v = v_lead;
        let mut gap = idm_equilibrium_gap(v_lead, &p).unwrap();
        for _ in 0..100 {
            let a = idm_acceleration(v, v - v_lead, gap, &p).unwrap();
            gap += (v_lead - v) * dt;
            v += a * dt;
        }
        assert!((v - v_lead).abs() < 1e-6);
        assert!((gap - idm_equilibrium_gap(v_lead, &p).unwrap()).abs() < 1e-6);
    }
}
