//! Rollout collection and generalized advantage estimation.

use natadv_nn::{GaussianParams, GaussianPolicy, Mlp};
use rand::Rng;

use crate::env::{Environment, Observation};
use crate::error::LearnError;

/// One environment transition. `action` is the raw Gaussian sample (what the
/// stored logprob describes); `applied` is the same action after the
/// environment's bounds, i.e. what actually happened.
#[derive(Debug, Clone)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub applied: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub logprob: f64,
    /// Critic value of `obs` under the collection-time critic.
    pub value: f64,
    /// Critic value of the successor state; zero when `done`.
    pub next_value: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub transitions: Vec<Transition>,
    /// Return and length of each episode completed inside this buffer.
    pub episode_returns: Vec<f64>,
    pub episode_steps: Vec<usize>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn episodes_completed(&self) -> usize {
        self.episode_returns.len()
    }

    pub fn mean_reward(&self) -> f64 {
        if self.transitions.is_empty() {
            return 0.0;
        }
        self.transitions.iter().map(|t| t.reward).sum::<f64>() / self.transitions.len() as f64
    }

    pub fn mean_episode_return(&self) -> f64 {
        if self.episode_returns.is_empty() {
            return 0.0;
        }
        self.episode_returns.iter().sum::<f64>() / self.episode_returns.len() as f64
    }

    pub fn mean_episode_steps(&self) -> f64 {
        if self.episode_steps.is_empty() {
            return 0.0;
        }
        self.episode_steps.iter().sum::<usize>() as f64 / self.episode_steps.len() as f64
    }
}

/// Collects exactly `batch` transitions, resetting the environment as needed
/// with seeds drawn from `rng`. Actions are sampled from the policy, the
/// logprob of the raw sample is recorded, and the clamped action is applied.
/// `reward_hook` maps (state, policy distribution at it, applied action,
/// environment reward) to the reward actually stored.
pub fn collect_rollouts_with<E, R, F>(
    env: &mut E,
    policy: &GaussianPolicy,
    critic: &Mlp,
    batch: usize,
    rng: &mut R,
    mut reward_hook: F,
) -> Result<RolloutBuffer, LearnError>
where
    E: Environment + ?Sized,
    R: Rng + ?Sized,
    F: FnMut(&Observation, &GaussianParams, &[f64], f64) -> Result<f64, LearnError>,
{
    if batch == 0 {
        return Err(LearnError::EmptyBuffer);
    }
    let bounds = env.action_bounds();
    let mut buffer = RolloutBuffer::default();
    let mut current = env.reset(rng.random())?;
    let mut episode_return = 0.0;
    let mut episode_len = 0usize;

    while buffer.len() < batch {
        let dist = policy.dist(&current.obs)?;
        let action = dist.sample(rng)?;
        let logprob = dist.log_prob(&action)?;
        let applied: Vec<f64> = action
            .iter()
            .zip(&bounds)
            .map(|(a, b)| a.clamp(b[0], b[1]))
            .collect();
        let value = critic.infer(&current.obs)?[0];

        let outcome = env.step(&applied)?;
        let reward = reward_hook(&current, &dist, &applied, outcome.reward)?;
        let next_value = if outcome.done { 0.0 } else { critic.infer(&outcome.next.obs)?[0] };

        episode_return += reward;
        episode_len += 1;
        buffer.transitions.push(Transition {
            obs: std::mem::take(&mut current.obs),
            action,
            applied,
            reward,
            done: outcome.done,
            logprob,
            value,
            next_value,
        });

        if outcome.done {
            buffer.episode_returns.push(episode_return);
            buffer.episode_steps.push(episode_len);
            episode_return = 0.0;
            episode_len = 0;
            current = env.reset(rng.random())?;
        } else {
            current = outcome.next;
        }
    }
    Ok(buffer)
}

/// Plain collection: the environment's reward is stored as-is.
pub fn collect_rollouts<E, R>(
    env: &mut E,
    policy: &GaussianPolicy,
    critic: &Mlp,
    batch: usize,
    rng: &mut R,
) -> Result<RolloutBuffer, LearnError>
where
    E: Environment + ?Sized,
    R: Rng + ?Sized,
{
    collect_rollouts_with(env, policy, critic, batch, rng, |_, _, _, r| Ok(r))
}

/// Generalized advantage estimation over a buffer that may span several
/// episodes. Episode boundaries reset the recursion; the final transition of
/// a truncated episode bootstraps through its stored successor value.
/// Returns advantages and critic regression targets (advantage + value).
pub fn compute_gae(
    buffer: &RolloutBuffer,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>), LearnError> {
    if buffer.is_empty() {
        return Err(LearnError::EmptyBuffer);
    }
    let n = buffer.len();
    let mut advantages = vec![0.0; n];
    let mut carry = 0.0;
    for t in (0..n).rev() {
        let tr = &buffer.transitions[t];
        let delta = tr.reward + gamma * tr.next_value - tr.value;
        if tr.done {
            carry = 0.0;
        }
        carry = delta + gamma * lambda * carry;
        advantages[t] = carry;
    }
    let targets = advantages
        .iter()
        .zip(&buffer.transitions)
        .map(|(a, tr)| a + tr.value)
        .collect();
    Ok((advantages, targets))
}
