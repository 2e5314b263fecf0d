//! Training stack: PPO on diagonal Gaussian policies, imitation learning
//! against recorded driving, and adversarial scenario generation on top of
//! the simulation kernel.
//!
//! The crate is organized around one `Environment` trait. `ReplayEnv` steps a
//! learner through recorded traffic for imitation; `AdvEnv` puts a learned
//! agent into live surrogate traffic and rewards it for forcing a collision
//! with a selected vehicle under test while a prior policy scores how
//! natural its behavior stays. All training is single-threaded and seeded;
//! batch generation fans out over a thread pool without losing determinism.

mod adversarial;
mod env;
mod error;
mod expert;
mod features;
mod gail;
mod ppo;
mod rollout;

pub use adversarial::{
    adversarial_reward, collision_reward, distance_reward, generate_scenarios,
    naturalness_reward, read_scenario_jsonl, run_scenario, select_av_under_test, total_reward,
    train_adversarial, write_adv_curves, write_scenario_jsonl, AdvCurveRow, AdvEnv,
    AdvSceneConfig, AdvTermination, RunManifest, ScenarioRecord, ScenarioStep,
};
pub use env::{Environment, Observation, StepOutcome, TargetEnv};
pub use error::LearnError;
pub use expert::{
    collect_expert_trajectories, expert_action_bounds, invert_bicycle, CollectionRules,
    ExpertBuffer, ReplayScenario, VehicleSnap,
};
pub use features::{
    adv_state_features, gail_state_features, GailFeatures, ADV_STATE_DIM, GAIL_EGO_DIM,
    GAIL_FEATURE_DIM, GAIL_NEIGHBOR_SLOTS, NEIGHBOR_RADIUS,
};
pub use gail::{
    discriminator_accuracy, discriminator_epoch, discriminator_grads, discriminator_loss,
    gail_reward, policy_action_moments, train_gail, write_gail_curves, Discriminator,
    GailCurveRow, ReplayEnv, DISC_HIDDEN, GAIL_REWARD_CAP,
};
pub use ppo::{
    clipped_surrogate, critic_loss, evaluate_mean_return, ppo_update, train_ppo,
    write_training_log, PpoConfig, PpoStats, TrainLogRow,
};
pub use rollout::{collect_rollouts, collect_rollouts_with, compute_gae, RolloutBuffer, Transition};
