//! Clipped-surrogate policy optimization with GAE and Adam.

use natadv_nn::{
    diag_gaussian_logprob_grads, AdamState, GaussianParams, GaussianPolicy, Mlp,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::LearnError;
use crate::rollout::{collect_rollouts, compute_gae, RolloutBuffer};

/// Training hyperparameters. Learning rates: `critic_lr` drives the value
/// net, `actor_lr` the policy, `disc_lr` the imitation discriminator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub critic_lr: f64,
    pub actor_lr: f64,
    pub disc_lr: f64,
    pub batch: usize,
    /// KL bound M of the naturalness reward.
    pub kl_bound: f64,
    /// Naturalness balance weight.
    pub balance: f64,
    pub max_episodes: usize,
    pub epochs: usize,
    pub minibatch: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            critic_lr: 0.001,
            actor_lr: 0.0001,
            disc_lr: 0.0001,
            batch: 2048,
            kl_bound: 25.0,
            balance: 0.02,
            max_episodes: 500,
            epochs: 10,
            minibatch: 256,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |m: &str| Err(LearnError::InvalidConfig(m.into()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must be in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda must be in [0, 1]");
        }
        if !(self.clip > 0.0) {
            return bad("clip must be positive");
        }
        if self.batch == 0 || self.minibatch == 0 || self.epochs == 0 {
            return bad("batch, minibatch, and epochs must be nonzero");
        }
        if !(self.kl_bound > 0.0) {
            return bad("kl_bound must be positive");
        }
        if self.balance < 0.0 {
            return bad("balance must be non-negative");
        }
        Ok(())
    }
}

/// Mean squared error of value predictions against regression targets.
pub fn critic_loss(pred: &[f64], target: &[f64]) -> Result<f64, LearnError> {
    if pred.len() != target.len() {
        return Err(LearnError::LengthMismatch { a: pred.len(), b: target.len() });
    }
    if pred.is_empty() {
        return Err(LearnError::EmptyBuffer);
    }
    let n = pred.len() as f64;
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n)
}

/// The clipped PPO objective as a loss:
/// -mean( min(r * A, clamp(r, 1-eps, 1+eps) * A) ), r = exp(new - old).
pub fn clipped_surrogate(
    logprob_new: &[f64],
    logprob_old: &[f64],
    advantages: &[f64],
    clip: f64,
) -> Result<f64, LearnError> {
    if logprob_new.len() != logprob_old.len() {
        return Err(LearnError::LengthMismatch { a: logprob_new.len(), b: logprob_old.len() });
    }
    if logprob_new.len() != advantages.len() {
        return Err(LearnError::LengthMismatch { a: logprob_new.len(), b: advantages.len() });
    }
    if advantages.is_empty() {
        return Err(LearnError::EmptyBuffer);
    }
    let mut total = 0.0;
    for ((new, old), adv) in logprob_new.iter().zip(logprob_old).zip(advantages) {
        let r = (new - old).exp();
        total += (r * adv).min(r.clamp(1.0 - clip, 1.0 + clip) * adv);
    }
    Ok(-total / advantages.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpoStats {
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub mean_reward: f64,
    /// Mean KL from the pre-update policy to the post-update policy over the
    /// buffer's states.
    pub mean_kl: f64,
    pub transitions: usize,
    pub episodes: usize,
}

/// One PPO update: GAE, per-buffer advantage normalization, then
/// `cfg.epochs` passes of minibatch Adam steps on actor and critic. The
/// buffer is consumed; losses are averaged over all minibatch steps.
pub fn ppo_update<R: Rng + ?Sized>(
    policy: &mut GaussianPolicy,
    critic: &mut Mlp,
    actor_opt: &mut AdamState,
    critic_opt: &mut AdamState,
    buffer: RolloutBuffer,
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<PpoStats, LearnError> {
    cfg.validate()?;
    if buffer.is_empty() {
        return Err(LearnError::EmptyBuffer);
    }
    let n = buffer.len();
    let (advantages, targets) = compute_gae(&buffer, cfg.gamma, cfg.lambda)?;

    let mean = advantages.iter().sum::<f64>() / n as f64;
    let var = advantages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    let advantages: Vec<f64> = advantages.iter().map(|a| (a - mean) / (std + 1e-8)).collect();

    let old_dists: Vec<GaussianParams> = buffer
        .transitions
        .iter()
        .map(|t| policy.dist(&t.obs))
        .collect::<Result<_, _>>()?;

    let mut actor_loss_sum = 0.0;
    let mut critic_loss_sum = 0.0;
    let mut steps = 0usize;
    let mut indices: Vec<usize> = (0..n).collect();

    for _ in 0..cfg.epochs {
        indices.shuffle(rng);
        for chunk in indices.chunks(cfg.minibatch) {
            let m = chunk.len() as f64;
            let mut actor_grads = vec![0.0; policy.net().n_params()];
            let mut critic_grads = vec![0.0; critic.n_params()];
            let mut lp_new = Vec::with_capacity(chunk.len());
            let mut lp_old = Vec::with_capacity(chunk.len());
            let mut adv_mb = Vec::with_capacity(chunk.len());
            let mut mb_critic_loss = 0.0;

            for &i in chunk {
                let tr = &buffer.transitions[i];
                let adv = advantages[i];

                let (dist, cache) = policy.forward(&tr.obs)?;
                let new = dist.log_prob(&tr.action)?;
                let ratio = (new - tr.logprob).exp();
                lp_new.push(new);
                lp_old.push(tr.logprob);
                adv_mb.push(adv);

                let unclipped = ratio * adv;
                let clipped = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip) * adv;
                if unclipped <= clipped {
                    // Loss gradient wrt the new logprob: -(ratio * adv) / m.
                    let scale = -(ratio * adv) / m;
                    let (d_mean, d_logvar) =
                        diag_gaussian_logprob_grads(&dist.mean, &dist.var(), &tr.action)?;
                    let d_mean: Vec<f64> = d_mean.iter().map(|g| g * scale).collect();
                    let d_logvar: Vec<f64> = d_logvar.iter().map(|g| g * scale).collect();
                    let g = policy.backward(&cache, &d_mean, &d_logvar)?;
                    for (acc, gi) in actor_grads.iter_mut().zip(&g) {
                        *acc += gi;
                    }
                }

                let (out, vcache) = critic.forward(&tr.obs)?;
                let err = out[0] - targets[i];
                mb_critic_loss += err * err / m;
                let (g, _) = critic.backward(&vcache, &[2.0 * err / m])?;
                for (acc, gi) in critic_grads.iter_mut().zip(&g) {
                    *acc += gi;
                }
            }

            actor_loss_sum += clipped_surrogate(&lp_new, &lp_old, &adv_mb, cfg.clip)?;
            critic_loss_sum += mb_critic_loss;
            steps += 1;

            actor_opt.step(policy.net_mut().params_mut(), &actor_grads)?;
            critic_opt.step(critic.params_mut(), &critic_grads)?;
        }
    }

    let mut kl_sum = 0.0;
    for (tr, old) in buffer.transitions.iter().zip(&old_dists) {
        kl_sum += old.kl_to(&policy.dist(&tr.obs)?)?;
    }

    Ok(PpoStats {
        actor_loss: actor_loss_sum / steps as f64,
        critic_loss: critic_loss_sum / steps as f64,
        mean_reward: buffer.mean_reward(),
        mean_kl: kl_sum / n as f64,
        transitions: n,
        episodes: buffer.episodes_completed(),
    })
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub update_idx: usize,
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub mean_reward: f64,
    pub mean_kl: f64,
}

pub fn write_training_log<W: std::io::Write>(
    w: W,
    rows: &[TrainLogRow],
) -> Result<(), LearnError> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

/// Straight PPO training until at least `episode_budget` episodes have been
/// collected. Buffers that complete no episode still count as one so the
/// loop always terminates.
pub fn train_ppo<E: Environment + ?Sized>(
    env: &mut E,
    policy: &mut GaussianPolicy,
    critic: &mut Mlp,
    cfg: &PpoConfig,
    episode_budget: usize,
    seed: u64,
) -> Result<Vec<TrainLogRow>, LearnError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut actor_opt = AdamState::new(cfg.actor_lr, policy.net().n_params());
    let mut critic_opt = AdamState::new(cfg.critic_lr, critic.n_params());
    let mut rows = Vec::new();
    let mut episodes = 0usize;
    while episodes < episode_budget {
        let buffer = collect_rollouts(env, policy, critic, cfg.batch, &mut rng)?;
        episodes += buffer.episodes_completed().max(1);
        let stats =
            ppo_update(policy, critic, &mut actor_opt, &mut critic_opt, buffer, cfg, &mut rng)?;
        rows.push(TrainLogRow {
            update_idx: rows.len(),
            actor_loss: stats.actor_loss,
            critic_loss: stats.critic_loss,
            mean_reward: stats.mean_reward,
            mean_kl: stats.mean_kl,
        });
    }
    Ok(rows)
}

/// Mean undiscounted return of the policy's mean action over `episodes`
/// seeded episodes. Used to compare before/after training.
pub fn evaluate_mean_return<E: Environment + ?Sized>(
    env: &mut E,
    policy: &GaussianPolicy,
    episodes: usize,
    seed: u64,
) -> Result<f64, LearnError> {
    let bounds = env.action_bounds();
    let mut total = 0.0;
    for e in 0..episodes {
        let mut obs = env.reset(seed.wrapping_add(e as u64))?;
        loop {
            let dist = policy.dist(&obs.obs)?;
            let action: Vec<f64> = dist
                .mean
                .iter()
                .zip(&bounds)
                .map(|(a, b)| a.clamp(b[0], b[1]))
                .collect();
            let out = env.step(&action)?;
            total += out.reward;
            if out.done {
                break;
            }
            obs = out.next;
        }
    }
    Ok(total / episodes as f64)
}
