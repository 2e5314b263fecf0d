//! Cross-checks generalized advantage estimation against an independent
//! forward-sum implementation on randomized multi-episode buffers.

use natadv_learn::{compute_gae, RolloutBuffer, Transition};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn transition(reward: f64, value: f64, next_value: f64, done: bool) -> Transition {
    Transition {
        obs: vec![0.0],
        action: vec![0.0],
        applied: vec![0.0],
        reward,
        done,
        logprob: 0.0,
        value,
        next_value,
    }
}

fn random_buffer(rng: &mut ChaCha8Rng) -> RolloutBuffer {
    let len = rng.random_range(1..=32);
    let transitions = (0..len)
        .map(|_| {
            let done = rng.random_bool(0.2);
            transition(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                if done { 0.0 } else { rng.random_range(-5.0..5.0) },
                done,
            )
        })
        .collect();
    RolloutBuffer { transitions, ..Default::default() }
}

/// Direct definition: advantage(t) = sum over k of (gamma*lambda)^(k-t) *
/// delta_k from t through the end of t's episode, the `done` step included.
fn forward_sum(buffer: &RolloutBuffer, gamma: f64, lambda: f64) -> Vec<f64> {
    let n = buffer.transitions.len();
    (0..n)
        .map(|t| {
            let mut total = 0.0;
            let mut w = 1.0;
            for k in t..n {
                let tr = &buffer.transitions[k];
                total += w * (tr.reward + gamma * tr.next_value - tr.value);
                if tr.done {
                    break;
                }
                w *= gamma * lambda;
            }
            total
        })
        .collect()
}

#[test]
fn gae_matches_the_forward_sum_on_200_random_rollouts() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (gamma, lambda) = (0.99, 0.95);
    for case in 0..200 {
        let buffer = random_buffer(&mut rng);
        let (adv, targets) = compute_gae(&buffer, gamma, lambda).unwrap();
        let expect = forward_sum(&buffer, gamma, lambda);
        for (t, (a, e)) in adv.iter().zip(&expect).enumerate() {
            assert!((a - e).abs() < 1e-10, "case {case} index {t}: {a} vs {e}");
        }
        for ((a, tr), tgt) in adv.iter().zip(&buffer.transitions).zip(&targets) {
            assert!((a + tr.value - tgt).abs() < 1e-12);
        }
    }
}

#[test]
fn gae_matches_the_forward_sum_for_arbitrary_discounts() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..100 {
        let buffer = random_buffer(&mut rng);
        let gamma = rng.random_range(0.5..1.0);
        let lambda = rng.random_range(0.0..1.0);
        let (adv, _) = compute_gae(&buffer, gamma, lambda).unwrap();
        for (a, e) in adv.iter().zip(forward_sum(&buffer, gamma, lambda)) {
            assert!((a - e).abs() < 1e-10);
        }
    }
}

/// A buffer whose stored successor values agree with the next transition's
/// value, the way a real collector produces them. Only such buffers satisfy
/// the telescoping identity checked below.
fn consistent_buffer(rng: &mut ChaCha8Rng) -> RolloutBuffer {
    let len = rng.random_range(1..=32);
    let values: Vec<f64> = (0..=len).map(|_| rng.random_range(-5.0..5.0)).collect();
    let transitions = (0..len)
        .map(|i| {
            let done = rng.random_bool(0.2);
            transition(
                rng.random_range(-5.0..5.0),
                values[i],
                if done { 0.0 } else { values[i + 1] },
                done,
            )
        })
        .collect();
    RolloutBuffer { transitions, ..Default::default() }
}

#[test]
fn lambda_one_targets_are_discounted_returns_with_a_bootstrap_tail() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let gamma = 0.97;
    for _ in 0..50 {
        let buffer = consistent_buffer(&mut rng);
        let (_, targets) = compute_gae(&buffer, gamma, 1.0).unwrap();
        let n = buffer.transitions.len();
        for t in 0..n {
            let mut expect = 0.0;
            let mut w = 1.0;
            for k in t..n {
                let tr = &buffer.transitions[k];
                expect += w * tr.reward;
                w *= gamma;
                if tr.done {
                    break;
                }
                if k == n - 1 {
                    // truncated episode: the stored successor value closes it
                    expect += w * tr.next_value;
                }
            }
            assert!((targets[t] - expect).abs() < 1e-10, "t={t}");
        }
    }
}

proptest! {
    // Episode boundaries fully isolate the recursion: perturbing anything
    // after a done step leaves every advantage up to it bit-identical.
    #[test]
    fn rewards_never_leak_across_a_done_boundary(
        rewards in prop::collection::vec(-5.0..5.0f64, 4..24),
        values in prop::collection::vec(-5.0..5.0f64, 24),
        bump in 1.0..10.0f64,
    ) {
        let n = rewards.len();
        let boundary = n / 2;
        let build = |rs: &[f64]| RolloutBuffer {
            transitions: rs
                .iter()
                .enumerate()
                .map(|(i, &r)| {
                    let done = i == boundary || i == n - 1;
                    transition(r, values[i], if done { 0.0 } else { values[i] * 0.5 }, done)
                })
                .collect(),
            ..Default::default()
        };
        let base = build(&rewards);
        let mut bumped_rewards = rewards.clone();
        bumped_rewards[n - 1] += bump;
        let bumped = build(&bumped_rewards);

        let (a0, _) = compute_gae(&base, 0.99, 0.95).unwrap();
        let (a1, _) = compute_gae(&bumped, 0.99, 0.95).unwrap();
        for t in 0..=boundary {
            prop_assert_eq!(a0[t], a1[t], "index {} crossed the boundary", t);
        }
        if n - 1 > boundary {
            prop_assert_ne!(a0[n - 1], a1[n - 1]);
        }
    }
}
