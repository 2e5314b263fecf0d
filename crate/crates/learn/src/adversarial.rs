//! Adversarial agent training and batch scenario generation.
//!
//! One agent vehicle tries to force a collision with a selected vehicle
//! under test while surrogate-driven traffic reacts around it. Rewards mix
//! an approach/collision term with a naturalness term scored against the
//! imitation prior; generated runs are recorded step by step for analysis.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::Arc;

use natadv_nn::{AdamState, GaussianParams, GaussianPolicy, Mlp};
use natadv_sim::{
    neighbors, step_world, ActionBounds, CollisionEvent, ControlAction, RoadNetwork, SimConfig,
    VehicleId, VehicleState, WorldState,
};
use natadv_traffic::{SurrogateConfig, SurrogateDriver};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{Environment, Observation, StepOutcome};
use crate::error::LearnError;
use crate::expert::VehicleSnap;
use crate::features::{adv_state_features, gail_state_features, ADV_STATE_DIM};
use crate::ppo::{ppo_update, PpoConfig};
use crate::rollout::collect_rollouts_with;

/// Relative approach progress since the episode started, clipped to
/// `[-1, 1]`: positive when the agent has closed distance to the vehicle
/// under test, negative when it has fallen away.
pub fn distance_reward(
    p_av0: [f64; 2],
    p_agent0: [f64; 2],
    p_av: [f64; 2],
    p_agent: [f64; 2],
) -> Result<f64, LearnError> {
    let initial = (p_av0[0] - p_agent0[0]).hypot(p_av0[1] - p_agent0[1]);
    if initial <= 0.0 {
        return Err(LearnError::ZeroSeparation);
    }
    let current = (p_av[0] - p_agent[0]).hypot(p_av[1] - p_agent[1]);
    Ok(((initial - current) / initial).clamp(-1.0, 1.0))
}

/// +1 when the agent hit the vehicle under test this step (taking precedence
/// over anything else), -1 when it hit any other vehicle, 0 otherwise.
pub fn collision_reward(events: &[CollisionEvent], agent: VehicleId, av: VehicleId) -> f64 {
    let mut hit_other = false;
    for ev in events {
        if ev.involves(agent) {
            if ev.involves(av) {
                return 1.0;
            }
            hit_other = true;
        }
    }
    if hit_other {
        -1.0
    } else {
        0.0
    }
}

pub fn adversarial_reward(r_d: f64, r_c: f64) -> f64 {
    r_d + r_c
}

/// `clip((M - KL) / M, 0, 1)` with the prior as the reference distribution:
/// 1 when the agent acts exactly like the prior, 0 once the divergence
/// reaches the bound.
pub fn naturalness_reward(
    prior: &GaussianParams,
    agent: &GaussianParams,
    kl_bound: f64,
) -> Result<f64, LearnError> {
    if !(kl_bound > 0.0) {
        return Err(LearnError::InvalidConfig("kl_bound must be positive".into()));
    }
    let kl = prior.kl_to(agent)?;
    Ok(((kl_bound - kl) / kl_bound).clamp(0.0, 1.0))
}

/// `R_adv + balance * R_nat`. A zero balance returns `r_adv` unchanged.
pub fn total_reward(r_adv: f64, r_nat: f64, balance: f64) -> f64 {
    if balance == 0.0 {
        return r_adv;
    }
    r_adv + balance * r_nat
}

/// Picks the vehicle the agent should pressure: the nearest vehicle within
/// 50 m in the agent's own or an adjacent lane; failing that, the nearest
/// within 50 m in any other lane; failing that, the nearest overall.
pub fn select_av_under_test(world: &WorldState, ego: VehicleId) -> Result<VehicleId, LearnError> {
    if world.vehicles.len() < 2 {
        return Err(LearnError::NotEnoughVehicles);
    }
    let state = world.require_vehicle(ego)?;
    let ego_lane = match state.lane {
        Some(l) => l,
        None => world.road.nearest_lane([state.x, state.y]).0.id,
    };
    let in_range = neighbors(world, ego, 50.0)?;
    for (id, _) in &in_range {
        let lane = world.require_vehicle(*id)?.lane;
        if lane == Some(ego_lane)
            || lane.is_some_and(|l| world.road.are_adjacent(ego_lane, l))
        {
            return Ok(*id);
        }
    }
    if let Some((id, _)) = in_range.first() {
        return Ok(*id);
    }
    let all = neighbors(world, ego, f64::INFINITY)?;
    Ok(all.first().expect("at least one other vehicle").0)
}

/// Why a generated episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvTermination {
    AgentAvCollision,
    AgentOtherCollision,
    BackgroundCollision,
    AgentOffRoad,
    Horizon,
}

/// Scene recipe for adversarial training and generation: a straight
/// multi-lane road with a staggered pack of surrogate-driven vehicles ahead
/// of the agent. Vehicle 0 is always the agent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdvSceneConfig {
    pub lanes: u32,
    pub lane_width: f64,
    pub road_length: f64,
    pub n_background: usize,
    pub surrogate: SurrogateConfig,
    pub base_speed: f64,
    /// Half-width of the uniform jitter on initial speeds.
    pub speed_jitter: f64,
    pub sim: SimConfig,
    pub agent_accel: [f64; 2],
    pub agent_steering: [f64; 2],
}

impl Default for AdvSceneConfig {
    fn default() -> Self {
        Self {
            lanes: 3,
            lane_width: 3.5,
            road_length: 600.0,
            n_background: 6,
            surrogate: SurrogateConfig::default(),
            base_speed: 8.0,
            speed_jitter: 1.5,
            sim: SimConfig::default(),
            agent_accel: [-12.0, 12.0],
            agent_steering: [-std::f64::consts::PI, std::f64::consts::PI],
        }
    }
}

impl AdvSceneConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |m: &str| Err(LearnError::InvalidConfig(m.into()));
        if self.lanes == 0 {
            return bad("at least one lane");
        }
        if self.n_background == 0 {
            return bad("need at least one background vehicle");
        }
        if !(self.road_length > 100.0) {
            return bad("road_length must exceed 100 m");
        }
        if !(self.base_speed > 0.0) || self.speed_jitter < 0.0 || self.speed_jitter >= self.base_speed {
            return bad("speeds must stay positive under jitter");
        }
        if self.agent_accel[0] >= self.agent_accel[1] || self.agent_steering[0] >= self.agent_steering[1] {
            return bad("agent bounds must be ordered");
        }
        Ok(())
    }

    pub fn agent_bounds(&self) -> ActionBounds {
        ActionBounds::new(self.agent_accel, self.agent_steering)
    }
}

/// Training and generation environment. Observations carry the 10-dim
/// adversarial state in `obs` and the agent's 56-dim prior features in
/// `aux`; the step reward is the adversarial term only.
pub struct AdvEnv {
    scene: AdvSceneConfig,
    road: Arc<RoadNetwork>,
    world: WorldState,
    drivers: HashMap<VehicleId, SurrogateDriver>,
    agent: VehicleId,
    av: VehicleId,
    initial_agent: [f64; 2],
    initial_av: [f64; 2],
    last_events: Vec<CollisionEvent>,
    termination: Option<AdvTermination>,
    bounds: ActionBounds,
    done: bool,
}

impl AdvEnv {
    pub fn new(scene: AdvSceneConfig) -> Result<Self, LearnError> {
        scene.validate()?;
        let road = Arc::new(RoadNetwork::straight(
            scene.lanes,
            scene.lane_width,
            scene.road_length,
        ));
        let bounds = scene.agent_bounds();
        let world = WorldState::new(Arc::clone(&road), Self::layout(&scene, 0), 0)?;
        let agent = VehicleId(0);
        let av = select_av_under_test(&world, agent)?;
        Ok(Self {
            scene,
            road,
            world,
            drivers: HashMap::new(),
            agent,
            av,
            initial_agent: [0.0, 0.0],
            initial_av: [0.0, 0.0],
            last_events: Vec::new(),
            termination: None,
            bounds,
            done: true,
        })
    }

    fn layout(scene: &AdvSceneConfig, seed: u64) -> Vec<VehicleState> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lane_y = |l: u32| -(l as f64) * scene.lane_width;
        let jitter = |rng: &mut ChaCha8Rng| {
            if scene.speed_jitter > 0.0 {
                rng.random_range(-scene.speed_jitter..scene.speed_jitter)
            } else {
                0.0
            }
        };

        let agent_lane = rng.random_range(0..scene.lanes);
        let agent_x = scene.road_length * 0.2 + rng.random_range(0.0..30.0);
        let agent_speed = scene.base_speed + jitter(&mut rng);
        let mut vehicles =
            vec![VehicleState::new(0, agent_x, lane_y(agent_lane), 0.0, agent_speed)];

        let mut cursors: Vec<f64> = (0..scene.lanes)
            .map(|_| agent_x + rng.random_range(12.0..24.0))
            .collect();
        for k in 0..scene.n_background {
            let lane = (k as u32) % scene.lanes;
            let x = cursors[lane as usize];
            cursors[lane as usize] += rng.random_range(16.0..30.0);
            let speed = scene.base_speed + jitter(&mut rng);
            vehicles.push(VehicleState::new(k as u64 + 1, x, lane_y(lane), 0.0, speed));
        }
        vehicles
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn roles(&self) -> (VehicleId, VehicleId) {
        (self.agent, self.av)
    }

    pub fn last_events(&self) -> &[CollisionEvent] {
        &self.last_events
    }

    pub fn termination(&self) -> Option<AdvTermination> {
        self.termination
    }

    fn observe(&self) -> Result<Observation, LearnError> {
        let mut obs = Observation::new(adv_state_features(&self.world, self.agent, self.av)?);
        obs.aux = gail_state_features(&self.world, self.agent)?.values;
        Ok(obs)
    }
}

impl Environment for AdvEnv {
    fn obs_dim(&self) -> usize {
        ADV_STATE_DIM
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn action_bounds(&self) -> Vec<[f64; 2]> {
        vec![self.bounds.accel, self.bounds.steering]
    }

    fn reset(&mut self, seed: u64) -> Result<Observation, LearnError> {
        self.world = WorldState::new(Arc::clone(&self.road), Self::layout(&self.scene, seed), seed)?;
        self.agent = VehicleId(0);
        self.av = select_av_under_test(&self.world, self.agent)?;
        self.drivers = self
            .world
            .vehicles
            .iter()
            .filter(|v| v.id != self.agent)
            .map(|v| (v.id, SurrogateDriver::new(self.scene.surrogate)))
            .collect();
        let agent = self.world.require_vehicle(self.agent)?;
        let av = self.world.require_vehicle(self.av)?;
        self.initial_agent = [agent.x, agent.y];
        self.initial_av = [av.x, av.y];
        self.last_events.clear();
        self.termination = None;
        self.done = false;
        self.observe()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome, LearnError> {
        if self.done {
            return Err(LearnError::InvalidConfig("step on a finished episode".into()));
        }
        let cmd = self.bounds.clamp(ControlAction::new(action[0], action[1]));
        let mut controls = HashMap::new();
        controls.insert(self.agent, cmd);
        for (&id, driver) in self.drivers.iter_mut() {
            controls.insert(id, driver.act(&self.world, id));
        }
        let (next, events) = step_world(&self.world, &controls, &self.scene.sim);
        self.world = next;

        let agent = self.world.require_vehicle(self.agent)?;
        let av = self.world.require_vehicle(self.av)?;
        let r_d = distance_reward(self.initial_av, self.initial_agent, [av.x, av.y], [agent.x, agent.y])?;
        let r_c = collision_reward(&events, self.agent, self.av);

        let agent_hit_av = events.iter().any(|e| e.involves(self.agent) && e.involves(self.av));
        let agent_hit = events.iter().any(|e| e.involves(self.agent));
        self.termination = if agent_hit_av {
            Some(AdvTermination::AgentAvCollision)
        } else if agent_hit {
            Some(AdvTermination::AgentOtherCollision)
        } else if !events.is_empty() {
            Some(AdvTermination::BackgroundCollision)
        } else if self.scene.sim.offroad_terminates
            && self.road.locate([agent.x, agent.y]).is_none()
        {
            Some(AdvTermination::AgentOffRoad)
        } else if self.world.step_index >= self.scene.sim.horizon_steps {
            Some(AdvTermination::Horizon)
        } else {
            None
        };
        self.last_events = events;
        self.done = self.termination.is_some();

        Ok(StepOutcome {
            next: self.observe()?,
            reward: adversarial_reward(r_d, r_c),
            done: self.done,
        })
    }
}

/// One row of the adversarial training curves; reward components are means
/// over the update's collected transitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdvCurveRow {
    pub episode: usize,
    pub mean_adv_reward: f64,
    pub mean_nat_reward: f64,
    pub mean_total_reward: f64,
    pub mean_steps: f64,
}

pub fn write_adv_curves<W: Write>(w: W, rows: &[AdvCurveRow]) -> Result<(), LearnError> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

/// Trains the agent on `total_reward` with the naturalness term scored by
/// `prior` on each observation's aux features. `cfg.balance` = 0 reproduces
/// the adversarial-only baseline.
pub fn train_adversarial<E: Environment + ?Sized>(
    env: &mut E,
    prior: &GaussianPolicy,
    policy: &mut GaussianPolicy,
    critic: &mut Mlp,
    cfg: &PpoConfig,
    episode_budget: usize,
    seed: u64,
) -> Result<Vec<AdvCurveRow>, LearnError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut actor_opt = AdamState::new(cfg.actor_lr, policy.net().n_params());
    let mut critic_opt = AdamState::new(cfg.critic_lr, critic.n_params());

    let mut rows = Vec::new();
    let mut episodes = 0usize;
    while episodes < episode_budget {
        let mut adv_sum = 0.0;
        let mut nat_sum = 0.0;
        let mut total_sum = 0.0;
        let mut n = 0usize;
        let buffer = collect_rollouts_with(
            env,
            policy,
            critic,
            cfg.batch,
            &mut rng,
            |obs, dist, _applied, r_adv| {
                let prior_dist = prior.dist(&obs.aux)?;
                let r_nat = naturalness_reward(&prior_dist, dist, cfg.kl_bound)?;
                let r_total = total_reward(r_adv, r_nat, cfg.balance);
                adv_sum += r_adv;
                nat_sum += r_nat;
                total_sum += r_total;
                n += 1;
                Ok(r_total)
            },
        )?;
        episodes += buffer.episodes_completed().max(1);
        let mean_steps = buffer.mean_episode_steps();
        ppo_update(policy, critic, &mut actor_opt, &mut critic_opt, buffer, cfg, &mut rng)?;
        rows.push(AdvCurveRow {
            episode: episodes,
            mean_adv_reward: adv_sum / n as f64,
            mean_nat_reward: nat_sum / n as f64,
            mean_total_reward: total_sum / n as f64,
            mean_steps,
        });
    }
    Ok(rows)
}

/// One step of a generated run: the agent's executed action, the reward
/// split, and the full post-step world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioStep {
    pub step: u64,
    pub action: [f64; 2],
    pub r_adv: f64,
    pub r_nat: f64,
    pub r_total: f64,
    pub vehicles: Vec<VehicleSnap>,
}

/// A complete generated run. The reward series length equals the step count
/// by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub seed: u64,
    pub agent: u64,
    pub av: u64,
    pub steps: Vec<ScenarioStep>,
    pub termination: AdvTermination,
    pub collisions: Vec<CollisionEvent>,
}

/// Companion metadata written next to a run's step file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub seed: u64,
    pub config_hash: String,
    pub agent: u64,
    pub av: u64,
    pub termination: AdvTermination,
    pub steps: usize,
    pub agent_av_collisions: usize,
    pub agent_other_collisions: usize,
    pub background_collisions: usize,
}

impl RunManifest {
    pub fn new(record: &ScenarioRecord, config_hash: impl Into<String>) -> Self {
        let agent = VehicleId(record.agent);
        let av = VehicleId(record.av);
        let mut agent_av = 0;
        let mut agent_other = 0;
        let mut background = 0;
        for ev in &record.collisions {
            if ev.involves(agent) && ev.involves(av) {
                agent_av += 1;
            } else if ev.involves(agent) {
                agent_other += 1;
            } else {
                background += 1;
            }
        }
        Self {
            seed: record.seed,
            config_hash: config_hash.into(),
            agent: record.agent,
            av: record.av,
            termination: record.termination,
            steps: record.steps.len(),
            agent_av_collisions: agent_av,
            agent_other_collisions: agent_other,
            background_collisions: background,
        }
    }
}

pub fn write_scenario_jsonl<W: Write>(mut w: W, record: &ScenarioRecord) -> Result<(), LearnError> {
    for step in &record.steps {
        serde_json::to_writer(&mut w, step)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_scenario_jsonl<R: BufRead>(r: R) -> Result<Vec<ScenarioStep>, LearnError> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

const ACTION_STREAM_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

/// Runs one seeded episode with the trained policy and records every step.
/// Bit-identical for identical inputs and seed.
pub fn run_scenario(
    scene: &AdvSceneConfig,
    policy: &GaussianPolicy,
    prior: &GaussianPolicy,
    seed: u64,
    balance: f64,
    kl_bound: f64,
) -> Result<ScenarioRecord, LearnError> {
    let mut env = AdvEnv::new(scene.clone())?;
    let mut obs = env.reset(seed)?;
    let bounds = env.action_bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ACTION_STREAM_SALT);
    let (agent, av) = env.roles();

    let mut steps = Vec::new();
    let mut collisions = Vec::new();
    loop {
        let dist = policy.dist(&obs.obs)?;
        let raw = dist.sample(&mut rng)?;
        let applied: Vec<f64> =
            raw.iter().zip(&bounds).map(|(a, b)| a.clamp(b[0], b[1])).collect();
        let prior_dist = prior.dist(&obs.aux)?;
        let r_nat = naturalness_reward(&prior_dist, &dist, kl_bound)?;
        let out = env.step(&applied)?;
        let r_adv = out.reward;
        collisions.extend(env.last_events().iter().cloned());
        steps.push(ScenarioStep {
            step: env.world().step_index,
            action: [applied[0], applied[1]],
            r_adv,
            r_nat,
            r_total: total_reward(r_adv, r_nat, balance),
            vehicles: env
                .world()
                .vehicles
                .iter()
                .map(|v| VehicleSnap {
                    id: v.id.0,
                    x: v.x,
                    y: v.y,
                    heading: v.heading,
                    speed: v.speed,
                    length: v.length,
                    width: v.width,
                })
                .collect(),
        });
        if out.done {
            break;
        }
        obs = out.next;
    }
    Ok(ScenarioRecord {
        seed,
        agent: agent.0,
        av: av.0,
        steps,
        termination: env.termination().expect("episode ended"),
        collisions,
    })
}

/// `n_runs` independent seeded episodes, generated in parallel. Per-run
/// seeds are drawn from a master stream first, so the set of records is
/// independent of scheduling.
pub fn generate_scenarios(
    scene: &AdvSceneConfig,
    policy: &GaussianPolicy,
    prior: &GaussianPolicy,
    n_runs: usize,
    base_seed: u64,
    balance: f64,
    kl_bound: f64,
) -> Result<Vec<ScenarioRecord>, LearnError> {
    if n_runs == 0 {
        return Err(LearnError::InvalidConfig("n_runs must be at least 1".into()));
    }
    let mut master = ChaCha8Rng::seed_from_u64(base_seed);
    let seeds: Vec<u64> = (0..n_runs).map(|_| master.random()).collect();
    seeds
        .par_iter()
        .map(|&seed| run_scenario(scene, policy, prior, seed, balance, kl_bound))
        .collect()
}
