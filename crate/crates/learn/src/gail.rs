//! Imitation prior training: a discriminator over state-action pairs, the
//! derived imitation reward, a replay environment where background traffic
//! follows its recordings, and the alternating training loop.

use std::io::Write;
use std::sync::Arc;

use natadv_nn::{AdamState, GaussianPolicy, Mlp, MlpSpec};
use natadv_sim::{
    detect_collision, step_vehicle, ActionBounds, ControlAction, RoadNetwork, SimConfig,
    VehicleId, VehicleState, WorldState,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Environment, Observation, StepOutcome};
use crate::error::LearnError;
use crate::expert::{expert_action_bounds, ExpertBuffer, ReplayScenario};
use crate::features::{gail_state_features, GAIL_FEATURE_DIM};
use crate::ppo::{ppo_update, PpoConfig};
use crate::rollout::{collect_rollouts_with, RolloutBuffer};

/// Imitation reward ceiling: the reward at the floored discriminator output.
pub const GAIL_REWARD_CAP: f64 = 18.420680743952367;

/// Trunk widths used for the full-size discriminator.
pub const DISC_HIDDEN: [usize; 2] = [128, 128];

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary classifier over concatenated (state, action) pairs. Outputs are
/// squashed to (0, 1); by convention a score near 1 means "generated" and
/// near 0 means "expert". Logits are saturated at ±30 so the score never
/// collapses to an exact 0 or 1.
#[derive(Debug, Clone)]
pub struct Discriminator {
    net: Mlp,
    state_dim: usize,
    action_dim: usize,
}

impl Discriminator {
    pub fn init<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        hidden: Vec<usize>,
        rng: &mut R,
    ) -> Result<Self, LearnError> {
        let net = Mlp::init(MlpSpec::new(state_dim + action_dim, hidden, 1), rng)?;
        Ok(Self { net, state_dim, action_dim })
    }

    /// Wraps an existing single-output net; dims must match its input.
    pub fn from_net(net: Mlp, state_dim: usize, action_dim: usize) -> Result<Self, LearnError> {
        let probe = net.infer(&vec![0.0; state_dim + action_dim])?;
        if probe.len() != 1 {
            return Err(LearnError::InvalidConfig("discriminator net must have one output".into()));
        }
        Ok(Self { net, state_dim, action_dim })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn score(&self, state: &[f64], action: &[f64]) -> Result<f64, LearnError> {
        if state.len() != self.state_dim {
            return Err(LearnError::LengthMismatch { a: state.len(), b: self.state_dim });
        }
        if action.len() != self.action_dim {
            return Err(LearnError::LengthMismatch { a: action.len(), b: self.action_dim });
        }
        let z = self.net.infer(&assemble(state, action))?[0];
        Ok(sigmoid(z.clamp(-30.0, 30.0)))
    }
}

fn assemble(state: &[f64], action: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(state.len() + action.len());
    v.extend_from_slice(state);
    v.extend_from_slice(action);
    v
}

/// Classification loss minimized by the discriminator:
/// `-mean(log D(generated)) - mean(log(1 - D(expert)))`.
pub fn discriminator_loss(d_gen: &[f64], d_exp: &[f64]) -> Result<f64, LearnError> {
    if d_gen.is_empty() || d_exp.is_empty() {
        return Err(LearnError::EmptyBuffer);
    }
    for &d in d_gen.iter().chain(d_exp) {
        if !(d > 0.0 && d < 1.0) {
            return Err(LearnError::BadDiscriminatorOutput(d));
        }
    }
    let gen_term = d_gen.iter().map(|d| d.ln()).sum::<f64>() / d_gen.len() as f64;
    let exp_term = d_exp.iter().map(|d| (1.0 - d).ln()).sum::<f64>() / d_exp.len() as f64;
    Ok(-gen_term - exp_term)
}

/// Fraction of pairs on the correct side of 0.5; exact ties get half credit.
pub fn discriminator_accuracy(d_gen: &[f64], d_exp: &[f64]) -> f64 {
    let credit = |correct: bool, d: f64| {
        if d == 0.5 {
            0.5
        } else if correct {
            1.0
        } else {
            0.0
        }
    };
    let total: f64 = d_gen.iter().map(|&d| credit(d > 0.5, d)).sum::<f64>()
        + d_exp.iter().map(|&d| credit(d < 0.5, d)).sum::<f64>();
    total / (d_gen.len() + d_exp.len()).max(1) as f64
}

/// Imitation reward `-log D(s, a)` with the score floored at 1e-8.
pub fn gail_reward(d: f64) -> f64 {
    -d.max(1e-8).ln()
}

/// Loss, half-credit correct count, and parameter gradients of the
/// classification loss over one balanced batch of assembled inputs.
pub fn discriminator_grads(
    disc: &Discriminator,
    gen_inputs: &[Vec<f64>],
    exp_inputs: &[Vec<f64>],
) -> Result<(f64, f64, Vec<f64>), LearnError> {
    if gen_inputs.is_empty() || exp_inputs.is_empty() {
        return Err(LearnError::EmptyBuffer);
    }
    let mut grads = vec![0.0; disc.net.n_params()];
    let mut d_gen = Vec::with_capacity(gen_inputs.len());
    let mut d_exp = Vec::with_capacity(exp_inputs.len());
    let mut correct = 0.0;

    for (inputs, generated) in [(gen_inputs, true), (exp_inputs, false)] {
        let n = inputs.len() as f64;
        for x in inputs {
            let (out, cache) = disc.net.forward(x)?;
            let d = sigmoid(out[0].clamp(-30.0, 30.0));
            // d(loss)/d(logit) through the squash
            let dz = if generated { -(1.0 - d) / n } else { d / n };
            let (g, _) = disc.net.backward(&cache, &[dz])?;
            for (acc, gi) in grads.iter_mut().zip(&g) {
                *acc += gi;
            }
            if generated {
                d_gen.push(d);
            } else {
                d_exp.push(d);
            }
            let right = if generated { d > 0.5 } else { d < 0.5 };
            correct += if d == 0.5 {
                0.5
            } else if right {
                1.0
            } else {
                0.0
            };
        }
    }
    Ok((discriminator_loss(&d_gen, &d_exp)?, correct, grads))
}

/// One pass over the generated transitions in balanced minibatches: each
/// minibatch takes equal halves of generated and (cycled) expert pairs and
/// applies one Adam step. Returns (mean minibatch loss, overall accuracy).
pub fn discriminator_epoch<R: Rng + ?Sized>(
    disc: &mut Discriminator,
    opt: &mut AdamState,
    buffer: &RolloutBuffer,
    expert: &ExpertBuffer,
    minibatch: usize,
    rng: &mut R,
) -> Result<(f64, f64), LearnError> {
    if buffer.is_empty() {
        return Err(LearnError::EmptyBuffer);
    }
    if expert.is_empty() {
        return Err(LearnError::EmptyExpert);
    }
    let gen: Vec<Vec<f64>> = buffer
        .transitions
        .iter()
        .map(|t| assemble(&t.obs, &t.applied))
        .collect();
    let exp: Vec<Vec<f64>> = expert
        .states
        .iter()
        .zip(&expert.actions)
        .map(|(s, a)| assemble(s, a))
        .collect();

    let mut gidx: Vec<usize> = (0..gen.len()).collect();
    gidx.shuffle(rng);
    let mut eperm: Vec<usize> = (0..exp.len()).collect();
    eperm.shuffle(rng);

    let half = (minibatch / 2).max(1);
    let mut loss_sum = 0.0;
    let mut batches = 0usize;
    let mut correct = 0.0;
    let mut samples = 0usize;

    for (b, chunk) in gidx.chunks(half).enumerate() {
        let gen_mb: Vec<Vec<f64>> = chunk.iter().map(|&i| gen[i].clone()).collect();
        let exp_mb: Vec<Vec<f64>> = (0..chunk.len())
            .map(|k| exp[eperm[(b * half + k) % exp.len()]].clone())
            .collect();
        let (loss, right, grads) = discriminator_grads(disc, &gen_mb, &exp_mb)?;
        opt.step(disc.net.params_mut(), &grads)?;
        loss_sum += loss;
        batches += 1;
        correct += right;
        samples += gen_mb.len() + exp_mb.len();
    }
    Ok((loss_sum / batches as f64, correct / samples as f64))
}

/// Replays recorded windows: the selected vehicle is integrated from policy
/// actions while every other vehicle follows its recording frame by frame.
/// The step reward is zero; imitation rewards are attached by the caller.
/// Episodes end at the window's last frame, on an ego collision, or when the
/// ego leaves the road.
pub struct ReplayEnv {
    road: Arc<RoadNetwork>,
    scenarios: Vec<ReplayScenario>,
    cfg: SimConfig,
    bounds: ActionBounds,
    scenario_idx: usize,
    frame_idx: usize,
    ego: VehicleState,
    done: bool,
}

impl ReplayEnv {
    pub fn new(
        road: Arc<RoadNetwork>,
        scenarios: Vec<ReplayScenario>,
        cfg: SimConfig,
    ) -> Result<Self, LearnError> {
        if scenarios.is_empty() {
            return Err(LearnError::InvalidConfig("no replay scenarios".into()));
        }
        for s in &scenarios {
            if s.frames.len() < 2 {
                return Err(LearnError::InvalidConfig("replay scenario shorter than 2 frames".into()));
            }
            if s.ego_snap(0).is_none() {
                return Err(LearnError::InvalidConfig("replay scenario missing its ego".into()));
            }
        }
        let ego = scenarios[0].ego_snap(0).unwrap().to_state();
        Ok(Self {
            road,
            scenarios,
            cfg,
            bounds: expert_action_bounds(),
            scenario_idx: 0,
            frame_idx: 0,
            ego,
            done: true,
        })
    }

    pub fn scenario_count(&self) -> usize {
        self.scenarios.len()
    }

    pub fn current_scenario(&self) -> usize {
        self.scenario_idx
    }

    fn world_at(&self, frame_idx: usize) -> Result<WorldState, LearnError> {
        let scenario = &self.scenarios[self.scenario_idx];
        let mut vehicles: Vec<VehicleState> = scenario.frames[frame_idx]
            .iter()
            .filter(|s| s.id != scenario.ego)
            .map(|s| s.to_state())
            .collect();
        vehicles.push(self.ego.clone());
        Ok(WorldState::new(Arc::clone(&self.road), vehicles, 0)?)
    }

    fn observe(&self, frame_idx: usize) -> Result<Observation, LearnError> {
        let world = self.world_at(frame_idx)?;
        let ego = VehicleId(self.scenarios[self.scenario_idx].ego);
        Ok(Observation::new(gail_state_features(&world, ego)?.values))
    }
}

impl Environment for ReplayEnv {
    fn obs_dim(&self) -> usize {
        GAIL_FEATURE_DIM
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn action_bounds(&self) -> Vec<[f64; 2]> {
        vec![self.bounds.accel, self.bounds.steering]
    }

    fn reset(&mut self, seed: u64) -> Result<Observation, LearnError> {
        self.scenario_idx = (seed % self.scenarios.len() as u64) as usize;
        self.frame_idx = 0;
        self.ego = self.scenarios[self.scenario_idx].ego_snap(0).unwrap().to_state();
        self.done = false;
        self.observe(0)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome, LearnError> {
        if self.done {
            return Err(LearnError::InvalidConfig("step on a finished episode".into()));
        }
        let cmd = self.bounds.clamp(ControlAction::new(action[0], action[1]));
        self.ego = step_vehicle(&self.ego, cmd, &self.cfg);
        self.frame_idx += 1;

        let scenario = &self.scenarios[self.scenario_idx];
        let frame = &scenario.frames[self.frame_idx];
        let mut done = self.frame_idx + 1 >= scenario.frames.len();
        for snap in frame.iter().filter(|s| s.id != scenario.ego) {
            if detect_collision(self.frame_idx as u64, &self.ego, &snap.to_state()).is_some() {
                done = true;
                break;
            }
        }
        if self.cfg.offroad_terminates && self.road.locate([self.ego.x, self.ego.y]).is_none() {
            done = true;
        }
        self.done = done;
        Ok(StepOutcome { next: self.observe(self.frame_idx)?, reward: 0.0, done })
    }
}

/// One row of the training curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GailCurveRow {
    pub episode: usize,
    pub disc_loss: f64,
    pub disc_accuracy: f64,
    pub mean_steps: f64,
    pub mean_reward: f64,
}

pub fn write_gail_curves<W: Write>(w: W, rows: &[GailCurveRow]) -> Result<(), LearnError> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

/// Alternating imitation training: collect a batch under the imitation
/// reward, one discriminator epoch on balanced minibatches, one policy
/// update; repeat until at least `episode_budget` episodes have run. A zero
/// budget returns immediately with the nets untouched.
#[allow(clippy::too_many_arguments)]
pub fn train_gail<E: Environment + ?Sized>(
    env: &mut E,
    expert: &ExpertBuffer,
    policy: &mut GaussianPolicy,
    critic: &mut Mlp,
    disc: &mut Discriminator,
    cfg: &PpoConfig,
    episode_budget: usize,
    seed: u64,
) -> Result<Vec<GailCurveRow>, LearnError> {
    cfg.validate()?;
    if expert.is_empty() {
        return Err(LearnError::EmptyExpert);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut actor_opt = AdamState::new(cfg.actor_lr, policy.net().n_params());
    let mut critic_opt = AdamState::new(cfg.critic_lr, critic.n_params());
    let mut disc_opt = AdamState::new(cfg.disc_lr, disc.net.n_params());

    let mut rows = Vec::new();
    let mut episodes = 0usize;
    while episodes < episode_budget {
        let buffer =
            collect_rollouts_with(env, policy, critic, cfg.batch, &mut rng, |obs, _, applied, _| {
                Ok(gail_reward(disc.score(&obs.obs, applied)?))
            })?;
        let (disc_loss, disc_accuracy) =
            discriminator_epoch(disc, &mut disc_opt, &buffer, expert, cfg.minibatch, &mut rng)?;
        episodes += buffer.episodes_completed().max(1);
        let mean_steps = buffer.mean_episode_steps();
        let stats =
            ppo_update(policy, critic, &mut actor_opt, &mut critic_opt, buffer, cfg, &mut rng)?;
        rows.push(GailCurveRow {
            episode: episodes,
            disc_loss,
            disc_accuracy,
            mean_steps,
            mean_reward: stats.mean_reward,
        });
    }
    Ok(rows)
}

/// Per-dimension mean and variance of the actions a policy executes over
/// seeded evaluation episodes; variances are floored at 1e-8 so the result
/// always parameterizes a valid Gaussian.
pub fn policy_action_moments<E: Environment + ?Sized>(
    env: &mut E,
    policy: &GaussianPolicy,
    episodes: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>), LearnError> {
    let bounds = env.action_bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut actions: Vec<Vec<f64>> = Vec::new();
    for e in 0..episodes {
        let mut obs = env.reset(seed.wrapping_add(e as u64))?;
        loop {
            let dist = policy.dist(&obs.obs)?;
            let raw = dist.sample(&mut rng)?;
            let applied: Vec<f64> =
                raw.iter().zip(&bounds).map(|(a, b)| a.clamp(b[0], b[1])).collect();
            let out = env.step(&applied)?;
            actions.push(applied);
            if out.done {
                break;
            }
            obs = out.next;
        }
    }
    if actions.is_empty() {
        return Err(LearnError::EmptyBuffer);
    }
    let dim = actions[0].len();
    let n = actions.len() as f64;
    let mut mean = vec![0.0; dim];
    for a in &actions {
        for (m, v) in mean.iter_mut().zip(a) {
            *m += v / n;
        }
    }
    let mut var = vec![0.0; dim];
    for a in &actions {
        for (k, v) in a.iter().enumerate() {
            var[k] += (v - mean[k]).powi(2) / n;
        }
    }
    for v in &mut var {
        *v = v.max(1e-8);
    }
    Ok((mean, var))
}
