//! The environment contract shared by the toy task, the trajectory-replay
//! imitation setting, and the adversarial traffic scene.

use crate::error::LearnError;

/// What the agent sees at one state. `obs` feeds the policy; `aux` is an
/// optional second encoding of the same state for reward models that read a
/// different feature space (empty when unused).
#[derive(Debug, Clone, Default)]
pub struct Observation {
    pub obs: Vec<f64>,
    pub aux: Vec<f64>,
}

impl Observation {
    pub fn new(obs: Vec<f64>) -> Self {
        Self { obs, aux: Vec::new() }
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub next: Observation,
    pub reward: f64,
    pub done: bool,
}

pub trait Environment {
    fn obs_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Per-dimension `[lo, hi]` clamp applied to sampled actions.
    fn action_bounds(&self) -> Vec<[f64; 2]>;
    fn reset(&mut self, seed: u64) -> Result<Observation, LearnError>;
    fn step(&mut self, action: &[f64]) -> Result<StepOutcome, LearnError>;
}

/// 1-D double integrator: the agent applies bounded acceleration to bring
/// itself to the origin; each step pays the distance to it. Used as a
/// training smoke test with a known improvement signature.
#[derive(Debug, Clone)]
pub struct TargetEnv {
    pub dt: f64,
    pub horizon: usize,
    pub start_offset: f64,
    pos: f64,
    vel: f64,
    step: usize,
}

impl TargetEnv {
    pub fn new(horizon: usize) -> Self {
        Self {
            dt: 0.1,
            horizon,
            start_offset: 3.0,
            pos: 0.0,
            vel: 0.0,
            step: 0,
        }
    }
}

impl Environment for TargetEnv {
    fn obs_dim(&self) -> usize {
        2
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn action_bounds(&self) -> Vec<[f64; 2]> {
        vec![[-1.0, 1.0]]
    }

    fn reset(&mut self, seed: u64) -> Result<Observation, LearnError> {
        self.pos = if seed % 2 == 0 { self.start_offset } else { -self.start_offset };
        self.vel = 0.0;
        self.step = 0;
        Ok(Observation::new(vec![self.pos, self.vel]))
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome, LearnError> {
        if action.len() != 1 {
            return Err(LearnError::LengthMismatch { a: action.len(), b: 1 });
        }
        self.pos += self.vel * self.dt;
        self.vel += action[0] * self.dt;
        self.step += 1;
        Ok(StepOutcome {
            next: Observation::new(vec![self.pos, self.vel]),
            reward: -self.pos.abs(),
            done: self.step >= self.horizon,
        })
    }
}
