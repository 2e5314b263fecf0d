//! Symmetric exponential moving average and kinematic re-derivation.
//!
//! Measured speed and acceleration columns in trajectory exports are noisy
//! and mutually inconsistent. The pipeline smooths positions with a
//! symmetric exponential kernel, then rebuilds speed from positions and
//! acceleration from speed by finite differences, so the three series obey
//! the kinematic relations by construction.

use crate::error::TrafficError;

/// Half-width of the smoothing window in multiples of the time constant.
/// Kernel weights beyond 3 time constants are under e^-3 and are dropped.
const KERNEL_SUPPORT: f64 = 3.0;

/// Smooths a uniformly sampled series with the symmetric kernel
/// w(k) = exp(-|k| dt / delta), truncated at |k| dt <= 3 delta and at the
/// series ends. Weights renormalize over the samples actually present, so
/// constant series pass through unchanged.
pub fn sema_filter(series: &[f64], dt: f64, delta: f64) -> Result<Vec<f64>, TrafficError> {
    if series.is_empty() {
        return Err(TrafficError::EmptySeries);
    }
    if dt <= 0.0 {
        return Err(TrafficError::NonPositive { what: "dt", value: dt });
    }
    if delta <= 0.0 {
        return Err(TrafficError::NonPositive { what: "delta", value: delta });
    }
    let n = series.len();
    let reach = (KERNEL_SUPPORT * delta / dt + 1e-9).floor() as usize;
    let weights: Vec<f64> = (0..=reach).map(|k| (-(k as f64) * dt / delta).exp()).collect();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(reach);
        let hi = (i + reach).min(n - 1);
        let mut num = 0.0;
        let mut den = 0.0;
        for j in lo..=hi {
            let w = weights[i.abs_diff(j)];
            num += w * series[j];
            den += w;
        }
        out.push(num / den);
    }
    Ok(out)
}

/// Rebuilds speed and acceleration from planar positions: speed is the norm
/// of the central-difference velocity, acceleration the central difference
/// of speed; the ends use one-sided differences. Needs at least 3 samples.
pub fn correct_kinematics(
    xs: &[f64],
    ys: &[f64],
    dt: f64,
) -> Result<(Vec<f64>, Vec<f64>), TrafficError> {
    if xs.len() != ys.len() {
        return Err(TrafficError::LengthMismatch { a: xs.len(), b: ys.len() });
    }
    if xs.len() < 3 {
        return Err(TrafficError::ShortSeries { need: 3, got: xs.len() });
    }
    if dt <= 0.0 {
        return Err(TrafficError::NonPositive { what: "dt", value: dt });
    }
    let speed = central_difference_norm(xs, ys, dt);
    let accel = central_difference(&speed, dt);
    Ok((speed, accel))
}

fn central_difference_norm(xs: &[f64], ys: &[f64], dt: f64) -> Vec<f64> {
    let n = xs.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (lo, hi, span) = stencil(i, n);
        let vx = (xs[hi] - xs[lo]) / (span * dt);
        let vy = (ys[hi] - ys[lo]) / (span * dt);
        out.push(vx.hypot(vy));
    }
    out
}

/// Central differences of a scalar series, one-sided at the ends.
pub fn central_difference(series: &[f64], dt: f64) -> Vec<f64> {
    let n = series.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (lo, hi, span) = stencil(i, n);
        out.push((series[hi] - series[lo]) / (span * dt));
    }
    out
}

fn stencil(i: usize, n: usize) -> (usize, usize, f64) {
    if i == 0 {
        (0, 1, 1.0)
    } else if i == n - 1 {
        (n - 2, n - 1, 1.0)
    } else {
        (i - 1, i + 1, 2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_is_unchanged() {
        let series = vec![4.2; 50];
        let out = sema_filter(&series, 0.1, 0.5).unwrap();
        for v in out {
            assert!((v - 4.2).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_series_is_preserved_away_from_the_ends() {
        let dt = 0.1;
        let delta = 0.5;
        let n = 200;
        let series: Vec<f64> = (0..n).map(|i| 3.0 + 2.0 * i as f64 * dt).collect();
        let out = sema_filter(&series, dt, delta).unwrap();
        let reach = (3.0 * delta / dt) as usize;
        for i in reach..n - reach {
            assert!((out[i] - series[i]).abs() < 1e-10, "index {i}");
        }
        // Truncation at the ends biases toward the interior.
        assert!(out[0] > series[0]);
        assert!(out[n - 1] < series[n - 1]);
    }

    #[test]
    fn impulse_response_matches_the_kernel_sum() {
        let dt = 0.1;
        let delta = 0.5;
        let n = 101;
        let center = 50usize;
        let mut series = vec![0.0; n];
        series[center] = 1.0;
        let out = sema_filter(&series, dt, delta).unwrap();

        let reach = 15; // floor(3 * 0.5 / 0.1)
        let den: f64 = (-(reach as i64)..=reach as i64)
            .map(|k| (-(k.abs() as f64) * dt / delta).exp())
            .sum();
        for (i, &v) in out.iter().enumerate() {
            let k = center.abs_diff(i);
            let expected = if k <= reach {
                (-(k as f64) * dt / delta).exp() / den
            } else {
                0.0
            };
            assert!((v - expected).abs() < 1e-12, "index {i}");
        }
    }

    #[test]
    fn window_cutoff_is_exactly_three_time_constants() {
        let dt = 0.1;
        let delta = 0.5;
        let mut series = vec![0.0; 40];
        series[0] = 100.0;
        let out = sema_filter(&series, dt, delta).unwrap();
        assert!(out[15] > 0.0);
        assert_eq!(out[16], 0.0);
    }

    #[test]
    fn smoothing_attenuates_noise() {
        let dt = 0.1;
        // Alternating measurement error around a ramp.
        let series: Vec<f64> = (0..300)
            .map(|i| i as f64 * 0.05 + if i % 2 == 0 { 0.4 } else { -0.4 })
            .collect();
        let out = sema_filter(&series, dt, 0.5).unwrap();
        let err_in: f64 = (50..250).map(|i| (series[i] - i as f64 * 0.05).abs()).sum();
        let err_out: f64 = (50..250).map(|i| (out[i] - i as f64 * 0.05).abs()).sum();
        assert!(err_out < err_in / 5.0);
    }

    #[test]
    fn invalid_smoothing_inputs_error() {
        assert!(sema_filter(&[], 0.1, 0.5).is_err());
        assert!(sema_filter(&[1.0], 0.0, 0.5).is_err());
        assert!(sema_filter(&[1.0], 0.1, 0.0).is_err());
    }

    #[test]
    fn straight_constant_speed_track_recovers_exactly() {
        let dt = 0.1;
        let xs: Vec<f64> = (0..100).map(|i| 10.0 * i as f64 * dt).collect();
        let ys = vec![0.0; 100];
        let (v, a) = correct_kinematics(&xs, &ys, dt).unwrap();
        for &vi in &v {
            assert!((vi - 10.0).abs() < 1e-9);
        }
        for &ai in &a {
            assert!(ai.abs() < 1e-9);
        }
    }

    #[test]
    fn uniform_acceleration_recovers_in_the_interior() {
        let dt = 0.1;
        // Arclength s = 5 t + 0.75 t^2 along the (0.6, 0.8) direction.
        let arc = |i: usize| {
            let t = i as f64 * dt;
            5.0 * t + 0.75 * t * t
        };
        let xs: Vec<f64> = (0..100).map(|i| 0.6 * arc(i)).collect();
        let ys: Vec<f64> = (0..100).map(|i| 0.8 * arc(i)).collect();
        let (v, a) = correct_kinematics(&xs, &ys, dt).unwrap();
        // Central differences are exact for quadratics in the interior.
        for i in 1..99 {
            let t = i as f64 * dt;
            assert!((v[i] - (5.0 + 1.5 * t)).abs() < 1e-9, "v at {i}");
        }
        for i in 2..98 {
            assert!((a[i] - 1.5).abs() < 1e-9, "a at {i}");
        }
    }

    #[test]
    fn too_few_samples_error() {
        let err = correct_kinematics(&[0.0, 1.0], &[0.0, 0.0], 0.1).unwrap_err();
        assert!(matches!(err, TrafficError::ShortSeries { need: 3, got: 2 }));
    }
}
