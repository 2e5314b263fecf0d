//! Parameter calibration from screened trajectory data.
//!
//! Car-following parameters come from a genetic algorithm minimizing the
//! mixed gap error between recorded and re-simulated followers. Lane-change
//! parameters come from percentiles of the realized gains and imposed
//! decelerations in observed lane changes.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::TrafficError;
use crate::idm::{idm_acceleration, IdmParameters, IdmRanges};
use crate::lane_change::LaneChangeEvent;
use crate::mobil::{mobil_incentive, MobilParameters};
use crate::segment::CarFollowingSegment;

/// Mixed error between recorded and simulated gap series:
/// sqrt( mean((d - s)^2 / |d|) / mean(|d|) ). Scale-aware but dimensionally
/// balanced, so short gaps are not drowned out by long ones.
pub fn objective_mixed_error(data: &[f64], sim: &[f64]) -> Result<f64, TrafficError> {
    if data.len() != sim.len() {
        return Err(TrafficError::LengthMismatch { a: data.len(), b: sim.len() });
    }
    if data.is_empty() {
        return Err(TrafficError::EmptySeries);
    }
    let mut weighted = 0.0;
    let mut magnitude = 0.0;
    for (i, (&d, &s)) in data.iter().zip(sim).enumerate() {
        if d == 0.0 {
            return Err(TrafficError::ZeroDataGap { index: i });
        }
        let e = d - s;
        weighted += e * e / d.abs();
        magnitude += d.abs();
    }
    let n = data.len() as f64;
    Ok(((weighted / n) / (magnitude / n)).sqrt())
}

/// Smallest gap fed to the model during re-simulation; candidate parameters
/// that crash the follower still get a finite (terrible) objective.
const SIM_GAP_FLOOR: f64 = 0.01;

/// Replays a segment with an IDM follower: the leader speed is taken from
/// the data, the ego starts from the recorded initial speed and gap, and
/// both integrate forward by explicit Euler at the segment's dt. Returns
/// the simulated gap series, same length as the segment.
pub fn simulate_idm_follower(
    segment: &CarFollowingSegment,
    params: &IdmParameters,
) -> Result<Vec<f64>, TrafficError> {
    let first = segment.samples.first().ok_or(TrafficError::EmptySeries)?;
    if first.gap <= 0.0 {
        return Err(TrafficError::NonPositiveGap { value: first.gap });
    }
    let dt = segment.dt;
    let mut v = first.v.max(0.0);
    let mut gap = first.gap;
    let mut out = Vec::with_capacity(segment.samples.len());
    for s in &segment.samples {
        out.push(gap);
        let a = idm_acceleration(v, v - s.leader_speed, gap.max(SIM_GAP_FLOOR), params)?;
        gap += (s.leader_speed - v) * dt;
        v = (v + a * dt).max(0.0);
    }
    Ok(out)
}

/// Corpus loss: mean mixed error across segments.
pub fn corpus_loss(
    segments: &[CarFollowingSegment],
    params: &IdmParameters,
) -> Result<f64, TrafficError> {
    if segments.is_empty() {
        return Err(TrafficError::EmptyCorpus(
            "no car-following segments to calibrate against".into(),
        ));
    }
    let mut total = 0.0;
    for seg in segments {
        let sim = simulate_idm_follower(seg, params)?;
        total += objective_mixed_error(&seg.gaps(), &sim)?;
    }
    Ok(total / segments.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub tournament_size: usize,
    /// Blend crossover expansion factor: children sample uniformly from the
    /// parents' interval widened by this fraction on both sides.
    pub blend_alpha: f64,
    /// Per-gene mutation probability.
    pub mutation_prob: f64,
    /// Mutation scale as a fraction of each gene's range.
    pub mutation_sigma: f64,
    pub elites: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 64,
            generations: 100,
            tournament_size: 3,
            blend_alpha: 0.5,
            mutation_prob: 0.25,
            mutation_sigma: 0.05,
            elites: 1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdmCalibration {
    pub params: IdmParameters,
    pub best_loss: f64,
    /// Best corpus loss after each generation; non-increasing under elitism.
    pub loss_curve: Vec<f64>,
    pub n_segments: usize,
    pub seed: u64,
}

fn clamp_genes(genes: &mut [f64; 5], ranges: &[[f64; 2]; 5]) {
    for (g, r) in genes.iter_mut().zip(ranges) {
        *g = g.clamp(r[0], r[1]);
    }
}

/// Fitness of one candidate; failed replays score infinitely bad instead of
/// aborting the search.
fn fitness(segments: &[CarFollowingSegment], params: &IdmParameters) -> f64 {
    corpus_loss(segments, params).unwrap_or(f64::INFINITY)
}

/// Calibrates IDM parameters against screened segments with a real-coded
/// genetic algorithm (tournament selection, blend crossover, Gaussian
/// mutation, one elite). Deterministic for a fixed seed: all randomness
/// comes from one seeded generator and candidate evaluation is pure, so the
/// parallel fitness pass cannot perturb the stream.
pub fn calibrate_idm(
    segments: &[CarFollowingSegment],
    ranges: &IdmRanges,
    cfg: &GaConfig,
    seed: u64,
) -> Result<IdmCalibration, TrafficError> {
    if segments.is_empty() {
        return Err(TrafficError::EmptyCorpus(
            "car-following calibration needs at least one segment".into(),
        ));
    }
    let accel_exponent = IdmParameters::default().accel_exponent;
    let bounds = ranges.as_array();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut population: Vec<[f64; 5]> = (0..cfg.population)
        .map(|_| {
            let mut genes = [0.0; 5];
            for (g, r) in genes.iter_mut().zip(&bounds) {
                *g = rng.random_range(r[0]..=r[1]);
            }
            genes
        })
        .collect();

    let evaluate = |pop: &[[f64; 5]]| -> Vec<f64> {
        pop.par_iter()
            .map(|genes| fitness(segments, &ranges.params_from(genes, accel_exponent)))
            .collect()
    };

    let mut scores = evaluate(&population);
    let mut curve = Vec::with_capacity(cfg.generations);

    for _ in 0..cfg.generations {
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

        let mut next: Vec<[f64; 5]> = order[..cfg.elites.min(order.len())]
            .iter()
            .map(|&i| population[i])
            .collect();

        while next.len() < cfg.population {
            let pick = |rng: &mut ChaCha8Rng| -> usize {
                (0..cfg.tournament_size)
                    .map(|_| rng.random_range(0..population.len()))
                    .min_by(|&a, &b| scores[a].total_cmp(&scores[b]))
                    .unwrap()
            };
            let a = population[pick(&mut rng)];
            let b = population[pick(&mut rng)];
            let mut child = [0.0; 5];
            for k in 0..5 {
                let (lo, hi) = (a[k].min(b[k]), a[k].max(b[k]));
                let span = hi - lo;
                child[k] = rng.random_range(
                    (lo - cfg.blend_alpha * span)..=(hi + cfg.blend_alpha * span),
                );
                if rng.random::<f64>() < cfg.mutation_prob {
                    let sigma = cfg.mutation_sigma * (bounds[k][1] - bounds[k][0]);
                    let z: f64 = rng.sample(StandardNormal);
                    child[k] += sigma * z;
                }
            }
            clamp_genes(&mut child, &bounds);
            next.push(child);
        }

        population = next;
        scores = evaluate(&population);
        let best = scores.iter().copied().fold(f64::INFINITY, f64::min);
        curve.push(best);
    }

    let best_idx = (0..population.len())
        .min_by(|&a, &b| scores[a].total_cmp(&scores[b]))
        .unwrap();
    Ok(IdmCalibration {
        params: ranges.params_from(&population[best_idx], accel_exponent),
        best_loss: scores[best_idx],
        loss_curve: curve,
        n_segments: segments.len(),
        seed,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MobilCalibration {
    pub params: MobilParameters,
    /// 10th percentile of realized gains.
    pub gain_p10: f64,
    /// 90th percentile of decelerations imposed on new followers.
    pub braking_p90: f64,
    pub n_events: usize,
}

/// Linear-interpolated percentile of a sample, q in [0, 1].
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Floor applied to the calibrated braking bound so degenerate corpora
/// cannot make every change "unsafe".
const MIN_BRAKING_BOUND: f64 = 0.1;

/// Derives lane-change thresholds from observed events: drivers accepted
/// roughly the gains they realized, so the incentive threshold is the 10th
/// percentile of realized gains and the braking bound the 90th percentile
/// of what new followers actually absorbed.
pub fn calibrate_mobil(
    events: &[LaneChangeEvent],
    politeness: f64,
) -> Result<MobilCalibration, TrafficError> {
    if events.is_empty() {
        let d = MobilParameters::default();
        return Err(TrafficError::EmptyCorpus(format!(
            "no lane-change events; defaults are gain threshold {} and braking bound {}",
            d.accel_gain_threshold, d.max_braking_imposed
        )));
    }
    let probe = MobilParameters {
        politeness,
        ..MobilParameters::default()
    };
    let mut gains: Vec<f64> = events
        .iter()
        .map(|e| mobil_incentive(&e.context, &probe))
        .collect();
    gains.sort_by(f64::total_cmp);
    let mut brakings: Vec<f64> = events
        .iter()
        .map(|e| -e.context.new_follower_after)
        .collect();
    brakings.sort_by(f64::total_cmp);

    let gain_p10 = percentile(&gains, 0.10);
    let braking_p90 = percentile(&brakings, 0.90);
    Ok(MobilCalibration {
        params: MobilParameters {
            politeness,
            accel_gain_threshold: gain_p10,
            max_braking_imposed: braking_p90.max(MIN_BRAKING_BOUND),
        },
        gain_p10,
        braking_p90,
        n_events: events.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobil::AccelContext;
    use crate::segment::CarFollowingSample;

    #[test]
    fn mixed_error_is_zero_for_identical_series() {
        let d = vec![5.0, 6.0, 7.0];
        assert_eq!(objective_mixed_error(&d, &d).unwrap(), 0.0);
    }

    #[test]
    fn mixed_error_matches_hand_evaluation() {
        // mean((d-s)^2/|d|) = (64 + 64/9)/2 = 320/9; mean|d| = 5;
        // sqrt((320/9)/5) = sqrt(64/9) = 8/3.
        let d = vec![1.0, 9.0];
        let s = vec![9.0, 1.0];
        let f = objective_mixed_error(&d, &s).unwrap();
        assert!((f - 8.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn mixed_error_rejects_bad_inputs() {
        assert!(matches!(
            objective_mixed_error(&[1.0], &[1.0, 2.0]),
            Err(TrafficError::LengthMismatch { .. })
        ));
        assert!(matches!(objective_mixed_error(&[], &[]), Err(TrafficError::EmptySeries)));
        assert!(matches!(
            objective_mixed_error(&[1.0, 0.0], &[1.0, 1.0]),
            Err(TrafficError::ZeroDataGap { index: 1 })
        ));
    }

    /// Synthetic segment generated by the very model being fit: leader
    /// follows a gentle sinusoidal speed, ego replayed through IDM.
    fn idm_generated_segment(params: &IdmParameters, n: usize) -> CarFollowingSegment {
        let dt = 0.1;
        let mut v = 8.0;
        let mut gap = 12.0;
        let mut x = 0.0;
        let samples = (0..n)
            .map(|i| {
                let t = i as f64 * dt;
                let leader_speed = 8.0 + 1.5 * (2.0 * std::f64::consts::PI * t / 20.0).sin();
                let sample = CarFollowingSample {
                    t,
                    x,
                    y: 0.0,
                    v,
                    a: 0.0,
                    dv: v - leader_speed,
                    headway: gap + 5.0,
                    gap,
                    leader_speed,
                };
                let a = idm_acceleration(v, v - leader_speed, gap.max(0.01), params).unwrap();
                x += v * dt;
                gap += (leader_speed - v) * dt;
                v = (v + a * dt).max(0.0);
                sample
            })
            .collect();
        CarFollowingSegment {
            id: "1-2-0".into(),
            ego_id: 1,
            leader_id: 2,
            start_frame: 0,
            dt,
            vehicle_class: Some(2),
            ego_length: 5.0,
            leader_length: 5.0,
            far_right: false,
            has_lane_change: false,
            samples,
        }
    }

    #[test]
    fn replay_with_the_generating_parameters_is_exact() {
        let p = IdmParameters::default();
        let seg = idm_generated_segment(&p, 300);
        let sim = simulate_idm_follower(&seg, &p).unwrap();
        let loss = objective_mixed_error(&seg.gaps(), &sim).unwrap();
        assert!(loss < 1e-12, "loss {loss}");
    }

    #[test]
    fn wrong_parameters_score_worse() {
        let truth = IdmParameters::default();
        let seg = idm_generated_segment(&truth, 300);
        let wrong = IdmParameters {
            time_headway: 2.5,
            min_gap: 4.0,
            ..truth
        };
        let sim = simulate_idm_follower(&seg, &wrong).unwrap();
        let loss = objective_mixed_error(&seg.gaps(), &sim).unwrap();
        assert!(loss > 0.3, "loss {loss}");
    }

    #[test]
    fn ga_recovers_a_low_loss_fit_and_never_regresses() {
        let truth = IdmParameters::default();
        let segments: Vec<_> = (0..3).map(|_| idm_generated_segment(&truth, 300)).collect();
        let fit =
            calibrate_idm(&segments, &IdmRanges::default(), &GaConfig::default(), 11).unwrap();
        assert!(fit.best_loss < 0.05, "best loss {}", fit.best_loss);
        for pair in fit.loss_curve.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "curve regressed: {pair:?}");
        }
    }

    #[test]
    fn ga_is_deterministic_for_a_fixed_seed() {
        let truth = IdmParameters::default();
        let segments = vec![idm_generated_segment(&truth, 200)];
        let cfg = GaConfig {
            population: 16,
            generations: 5,
            ..Default::default()
        };
        let a = calibrate_idm(&segments, &IdmRanges::default(), &cfg, 42).unwrap();
        let b = calibrate_idm(&segments, &IdmRanges::default(), &cfg, 42).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.loss_curve, b.loss_curve);
        let c = calibrate_idm(&segments, &IdmRanges::default(), &cfg, 43).unwrap();
        assert!(a.loss_curve != c.loss_curve);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let err = calibrate_idm(&[], &IdmRanges::default(), &GaConfig::default(), 0).unwrap_err();
        assert!(matches!(err, TrafficError::EmptyCorpus(_)));
    }

    #[test]
    fn percentile_interpolates_linearly() {
        let xs = vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        assert_eq!(percentile(&xs, 0.0), 0.0);
        assert_eq!(percentile(&xs, 1.0), 10.0);
        assert_eq!(percentile(&xs, 0.10), 1.0);
        assert_eq!(percentile(&xs, 0.25), 2.5);
        assert_eq!(percentile(&[7.0], 0.9), 7.0);
    }

    fn event_with(gain_parts: AccelContext) -> LaneChangeEvent {
        LaneChangeEvent {
            vehicle_id: 1,
            start_frame: 0,
            end_frame: 10,
            transition_frame: 5,
            from_lane: 0,
            to_lane: 1,
            peak_heading: -0.1,
            context: gain_parts,
        }
    }

    #[test]
    fn mobil_calibration_takes_percentiles_of_the_event_statistics() {
        // With politeness 0, the gain is just ego_after - ego_before.
        let events: Vec<_> = (0..11)
            .map(|i| {
                event_with(AccelContext {
                    ego_before: 0.0,
                    ego_after: i as f64 * 0.1,
                    new_follower_before: 0.0,
                    new_follower_after: -(i as f64 * 0.3),
                    old_follower_before: 0.0,
                    old_follower_after: 0.0,
                })
            })
            .collect();
        let fit = calibrate_mobil(&events, 0.0).unwrap();
        assert_eq!(fit.n_events, 11);
        assert!((fit.gain_p10 - 0.1).abs() < 1e-12);
        assert!((fit.braking_p90 - 2.7).abs() < 1e-12);
        assert!((fit.params.max_braking_imposed - 2.7).abs() < 1e-12);
        assert_eq!(fit.params.politeness, 0.0);
    }

    #[test]
    fn mobil_braking_bound_never_collapses_to_zero() {
        let events = vec![event_with(AccelContext {
            ego_before: -0.5,
            ego_after: 0.5,
            // New follower actually sped up; raw p90 of imposed braking
            // would be negative.
            new_follower_before: 0.0,
            new_follower_after: 0.4,
            old_follower_before: 0.0,
            old_follower_after: 0.0,
        })];
        let fit = calibrate_mobil(&events, 0.5).unwrap();
        assert_eq!(fit.params.max_braking_imposed, MIN_BRAKING_BOUND);
        assert!(fit.braking_p90 < 0.0);
    }

    #[test]
    fn empty_event_corpus_mentions_the_defaults() {
        let err = calibrate_mobil(&[], 0.5).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("0.2"), "{text}");
        assert!(text.contains('2'), "{text}");
    }
}
