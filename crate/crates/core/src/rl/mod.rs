//! Reward functions and the PPO / GRPO objectives and update steps.
//!
//! Rewards are outcome-only: trainers see exact-match scores of final
//! answers and never read memory-bank internals. Policies are trained at
//! temperature 1; all log-probabilities, ratios, and KL terms here are
//! exact because the desk-scale policies are categorical or
//! Bernoulli-factorized.

mod trainable;
mod update;

pub use trainable::TrainablePolicy;
pub use update::{
    grpo_objective_batch, grpo_update_step, ppo_objective, ppo_update_step, StepDiagnostics,
};

pub use crate::metrics::em_reward;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::PolicyStep;

#[derive(Debug, Error, PartialEq)]
pub enum RlError {
    #[error("group needs at least 2 candidates, got {0}")]
    GroupTooSmall(usize),
    #[error("trajectory is missing log_prob_old (policy without exact probabilities)")]
    MissingLogProb,
    #[error("non-finite gradient; parameters unchanged")]
    NonFiniteGradient,
    #[error("step kind does not match this policy")]
    StepKindMismatch,
    #[error("empty batch")]
    EmptyBatch,
    #[error("config invalid: {0}")]
    BadConfig(String),
    #[error("candidates in a group must share state_features")]
    MixedGroupState,
}

/// Trainer hyperparameters. Defaults: clip half-width 0.2, KL coefficient
/// 0.01, group size 4, learning rates 1e-6 (actor) / 1e-5 (critic).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub epsilon: f64,
    pub beta: f64,
    pub group_size: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub seed: u64,
    pub batch_size: usize,
    pub max_steps: usize,
    /// Checkpoint interval in update steps; 0 disables checkpoints.
    pub checkpoint_every: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.2,
            beta: 0.01,
            group_size: 4,
            actor_lr: 1e-6,
            critic_lr: 1e-5,
            seed: 0,
            batch_size: 1,
            max_steps: usize::MAX,
            checkpoint_every: 0,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self, needs_group: bool) -> Result<(), RlError> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(RlError::BadConfig(format!("epsilon {} outside (0, 1)", self.epsilon)));
        }
        if self.beta < 0.0 {
            return Err(RlError::BadConfig(format!("beta {} negative", self.beta)));
        }
        if needs_group && self.group_size < 2 {
            return Err(RlError::GroupTooSmall(self.group_size));
        }
        if self.batch_size == 0 {
            return Err(RlError::BadConfig("batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// One logged rollout: the replayable decision steps, the outcome reward,
/// and the behavior policy's log-probability of the whole action.
///
/// A single-decision rollout has one step; a manager episode has one step
/// per extracted fact, all sharing the episode's reward.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Critic input. For grouped candidates this identifies the shared
    /// state (the episode's initial decision state).
    pub state_features: Vec<f64>,
    pub steps: Vec<PolicyStep>,
    pub reward: f64,
    /// Sum of step log-probabilities under the behavior policy; `None`
    /// when the policy cannot report exact probabilities (LLM-backed).
    pub log_prob_old: Option<f64>,
}

/// `G` candidate rollouts from one shared state.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSample {
    pub candidates: Vec<Trajectory>,
}

impl GroupSample {
    pub fn new(candidates: Vec<Trajectory>) -> Result<Self, RlError> {
        if candidates.len() < 2 {
            return Err(RlError::GroupTooSmall(candidates.len()));
        }
        let first = &candidates[0].state_features;
        if candidates.iter().any(|c| &c.state_features != first) {
            return Err(RlError::MixedGroupState);
        }
        Ok(Self { candidates })
    }

    pub fn group_size(&self) -> usize {
        self.candidates.len()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.candidates.iter().map(|c| c.reward).collect()
    }
}

/// Linear state-value baseline for PPO.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticParameters {
    pub weights: Vec<f64>,
}

impl CriticParameters {
    pub fn zeros(dim: usize) -> Self {
        Self { weights: vec![0.0; dim] }
    }

    pub fn value(&self, state_features: &[f64]) -> f64 {
        self.weights.iter().zip(state_features).map(|(w, x)| w * x).sum()
    }
}

/// `min(ρ·A, clip(ρ, 1−ε, 1+ε)·A)` — the per-sample clipped surrogate.
pub fn clipped_surrogate(rho: f64, advantage: f64, epsilon: f64) -> f64 {
    debug_assert!(rho > 0.0, "importance ratio must be positive");
    let clipped = rho.clamp(1.0 - epsilon, 1.0 + epsilon);
    (rho * advantage).min(clipped * advantage)
}

/// Standardizes rewards within a group: `(r_i − mean) / std` with the
/// population standard deviation. Degenerate groups (zero spread) map to
/// all-zero advantages, skipping the update rather than dividing by zero.
pub fn group_advantages(rewards: &[f64]) -> Result<Vec<f64>, RlError> {
    let g = rewards.len();
    if g < 2 {
        return Err(RlError::GroupTooSmall(g));
    }
    let mean = rewards.iter().sum::<f64>() / g as f64;
    let variance = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / g as f64;
    if variance == 0.0 {
        return Ok(vec![0.0; g]);
    }
    let std = variance.sqrt();
    Ok(rewards.iter().map(|r| (r - mean) / std).collect())
}

/// Mean exact KL divergence `D_KL[π_params ‖ π_reference]` over a state
/// batch.
pub fn kl_estimate<P: TrainablePolicy>(
    params: &P,
    reference: &P,
    states: &[PolicyStep],
) -> Result<f64, RlError> {
    if states.is_empty() {
        return Err(RlError::EmptyBatch);
    }
    let mut total = 0.0;
    for state in states {
        let (kl, _) = params.state_kl(reference, state)?;
        total += kl;
    }
    Ok(total / states.len() as f64)
}

/// The grouped surrogate for one group: `(1/G) Σ ρ_i A_i` (clipped) minus
/// `β` times the mean KL over the group's states.
pub fn grpo_objective<P: TrainablePolicy>(
    group: &GroupSample,
    params: &P,
    reference: &P,
    config: &TrainerConfig,
) -> Result<f64, RlError> {
    config.validate(true)?;
    let advantages = group_advantages(&group.rewards())?;
    let g = group.group_size() as f64;
    let mut surrogate = 0.0;
    let mut states: Vec<&PolicyStep> = Vec::new();
    for (candidate, advantage) in group.candidates.iter().zip(&advantages) {
        let lp_old = candidate.log_prob_old.ok_or(RlError::MissingLogProb)?;
        let mut lp_new = 0.0;
        for step in &candidate.steps {
            lp_new += params.step_log_prob(step)?;
            states.push(step);
        }
        let rho = (lp_new - lp_old).exp();
        surrogate += clipped_surrogate(rho, *advantage, config.epsilon);
    }
    surrogate /= g;
    let kl = if config.beta > 0.0 && !states.is_empty() {
        let owned: Vec<PolicyStep> = states.iter().map(|s| (*s).clone()).collect();
        kl_estimate(params, reference, &owned)?
    } else {
        0.0
    };
    Ok(surrogate - config.beta * kl)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_examples() {
        assert!((clipped_surrogate(1.5, 1.0, 0.2) - 1.2).abs() < 1e-15);
        assert!((clipped_surrogate(1.0, 0.7, 0.2) - 0.7).abs() < 1e-15);
        // min(-0.5, -0.8) = -0.8
        assert!((clipped_surrogate(0.5, -1.0, 0.2) + 0.8).abs() < 1e-15);
    }

    #[test]
    fn clip_identity_inside_region() {
        let eps = 0.2;
        for i in 0..=100 {
            let rho = 0.85 + 0.3 * i as f64 / 100.0;
            let a = 0.37;
            assert_eq!(clipped_surrogate(rho, a, eps), rho * a);
        }
    }

    #[test]
    fn clipping_never_helps_upside() {
        for &(rho, a) in &[(0.3, 1.0), (1.7, 2.0), (0.9, 0.5), (2.5, 0.01)] {
            assert!(clipped_surrogate(rho, a, 0.2) <= rho * a + 1e-15);
        }
    }

    #[test]
    fn two_point_standardization() {
        assert_eq!(group_advantages(&[1.0, 0.0]).unwrap(), vec![1.0, -1.0]);
    }

    #[test]
    fn degenerate_group_is_all_zeros() {
        assert_eq!(group_advantages(&[1.0, 1.0, 1.0, 1.0]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn half_and_half_rewards() {
        // mean 0.5, population std 0.5.
        assert_eq!(group_advantages(&[1.0, 1.0, 0.0, 0.0]).unwrap(), vec![1.0, 1.0, -1.0, -1.0]);
    }

    #[test]
    fn too_small_group_is_rejected() {
        assert_eq!(group_advantages(&[1.0]).unwrap_err(), RlError::GroupTooSmall(1));
    }

    #[test]
    fn advantages_shift_invariant_and_sign_equivariant() {
        let rewards = [0.3, 0.9, 0.1, 0.7];
        let base = group_advantages(&rewards).unwrap();
        let shifted: Vec<f64> = rewards.iter().map(|r| r + 5.0).collect();
        let shifted_adv = group_advantages(&shifted).unwrap();
        for (a, b) in base.iter().zip(&shifted_adv) {
            assert!((a - b).abs() < 1e-12);
        }
        let negated: Vec<f64> = rewards.iter().map(|r| -r).collect();
        let negated_adv = group_advantages(&negated).unwrap();
        for (a, b) in base.iter().zip(&negated_adv) {
            assert!((a + b).abs() < 1e-12);
        }
    }

    proptest::proptest! {
        #[test]
        fn standardized_moments(rewards in proptest::collection::vec(-10.0f64..10.0, 2..16)) {
            let adv = group_advantages(&rewards).unwrap();
            let g = adv.len() as f64;
            let mean = adv.iter().sum::<f64>() / g;
            proptest::prop_assert!(mean.abs() < 1e-9);
            let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / g;
            let all_equal = rewards.windows(2).all(|w| w[0] == w[1]);
            if all_equal {
                proptest::prop_assert!(adv.iter().all(|a| *a == 0.0));
            } else {
                proptest::prop_assert!((var.sqrt() - 1.0).abs() < 1e-9);
            }
        }
    }
}
