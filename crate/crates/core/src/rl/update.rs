//! One-step PPO and GRPO updates with analytic gradients.
//!
//! Both trainers ascend the clipped surrogate with a single gradient step
//! per batch (no mini-epoch reuse). PPO uses the bandit advantage
//! `A = r − V(s)` with a linear critic trained by squared error; GRPO uses
//! within-group standardized advantages, a KL penalty to the frozen
//! reference, and no critic anywhere in its code path.

use serde::{Deserialize, Serialize};

use super::{
    clipped_surrogate, group_advantages, CriticParameters, GroupSample, RlError, TrainablePolicy,
    Trajectory, TrainerConfig,
};

/// Per-update diagnostics, one line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub mean_reward: f64,
    pub mean_ratio: f64,
    /// Fraction of candidates whose ratio fell outside the clip region.
    pub clip_fraction: f64,
    pub objective: f64,
    pub kl: Option<f64>,
    pub critic_loss: Option<f64>,
}

struct SurrogateTerm {
    value: f64,
    rho: f64,
    /// Whether the active min-branch passes gradient through ρ.
    pass_gradient: bool,
}

fn surrogate_term(rho: f64, advantage: f64, epsilon: f64) -> SurrogateTerm {
    let clipped_rho = rho.clamp(1.0 - epsilon, 1.0 + epsilon);
    let unclipped = rho * advantage;
    let clipped = clipped_rho * advantage;
    // min selects the unclipped branch (or both coincide): gradient flows.
    // A strictly smaller clipped branch is constant in θ.
    SurrogateTerm { value: unclipped.min(clipped), rho, pass_gradient: unclipped <= clipped }
}

fn trajectory_ratio<P: TrainablePolicy>(
    traj: &Trajectory,
    params: &P,
) -> Result<(f64, f64), RlError> {
    let lp_old = traj.log_prob_old.ok_or(RlError::MissingLogProb)?;
    let mut lp_new = 0.0;
    for step in &traj.steps {
        lp_new += params.step_log_prob(step)?;
    }
    Ok(((lp_new - lp_old).exp(), lp_new))
}

fn trajectory_grad_log_prob<P: TrainablePolicy>(
    traj: &Trajectory,
    params: &P,
) -> Result<Vec<f64>, RlError> {
    let mut grad = vec![0.0; params.flat_params().len()];
    for step in &traj.steps {
        for (g, dg) in grad.iter_mut().zip(params.step_grad_log_prob(step)?) {
            *g += dg;
        }
    }
    Ok(grad)
}

fn assert_finite(values: &[f64]) -> Result<(), RlError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(RlError::NonFiniteGradient)
    }
}

/// The PPO objective value for a batch at the given parameters: mean
/// clipped surrogate with advantages `r − V(s)`. The update step ascends
/// exactly this function; the finite-difference suite differentiates it.
pub fn ppo_objective<P: TrainablePolicy>(
    batch: &[Trajectory],
    actor: &P,
    critic: &CriticParameters,
    config: &TrainerConfig,
) -> Result<f64, RlError> {
    if batch.is_empty() {
        return Err(RlError::EmptyBatch);
    }
    config.validate(false)?;
    let mut total = 0.0;
    for traj in batch {
        let (rho, _) = trajectory_ratio(traj, actor)?;
        let advantage = traj.reward - critic.value(&traj.state_features);
        total += clipped_surrogate(rho, advantage, config.epsilon);
    }
    Ok(total / batch.len() as f64)
}

/// One PPO step: actor ascends the clipped surrogate, critic descends the
/// squared value error. Returns updated copies; on a non-finite gradient
/// the originals are untouched and an error is raised.
pub fn ppo_update_step<P: TrainablePolicy>(
    batch: &[Trajectory],
    actor: &P,
    critic: &CriticParameters,
    config: &TrainerConfig,
) -> Result<(P, CriticParameters, StepDiagnostics), RlError> {
    if batch.is_empty() {
        return Err(RlError::EmptyBatch);
    }
    config.validate(false)?;
    let n = batch.len() as f64;
    let mut actor_grad = vec![0.0; actor.flat_params().len()];
    let mut critic_grad = vec![0.0; critic.weights.len()];
    let mut objective = 0.0;
    let mut ratio_sum = 0.0;
    let mut clipped_count = 0usize;
    let mut reward_sum = 0.0;
    let mut critic_loss = 0.0;

    for traj in batch {
        let (rho, _) = trajectory_ratio(traj, actor)?;
        let value = critic.value(&traj.state_features);
        let advantage = traj.reward - value;
        let term = surrogate_term(rho, advantage, config.epsilon);
        objective += term.value;
        ratio_sum += rho;
        if rho < 1.0 - config.epsilon || rho > 1.0 + config.epsilon {
            clipped_count += 1;
        }
        reward_sum += traj.reward;

        if term.pass_gradient {
            let glp = trajectory_grad_log_prob(traj, actor)?;
            for (g, dlp) in actor_grad.iter_mut().zip(&glp) {
                *g += advantage * term.rho * dlp / n;
            }
        }

        let err = value - traj.reward;
        critic_loss += err * err;
        for (g, x) in critic_grad.iter_mut().zip(&traj.state_features) {
            *g += 2.0 * err * x / n;
        }
    }
    objective /= n;
    critic_loss /= n;

    assert_finite(&actor_grad)?;
    assert_finite(&critic_grad)?;

    let mut new_actor = actor.clone();
    let updated: Vec<f64> = actor
        .flat_params()
        .iter()
        .zip(&actor_grad)
        .map(|(p, g)| p + config.actor_lr * g)
        .collect();
    assert_finite(&updated)?;
    new_actor.set_flat_params(&updated);

    let new_critic_weights: Vec<f64> = critic
        .weights
        .iter()
        .zip(&critic_grad)
        .map(|(w, g)| w - config.critic_lr * g)
        .collect();
    assert_finite(&new_critic_weights)?;

    Ok((
        new_actor,
        CriticParameters { weights: new_critic_weights },
        StepDiagnostics {
            mean_reward: reward_sum / n,
            mean_ratio: ratio_sum / n,
            clip_fraction: clipped_count as f64 / n,
            objective,
            kl: None,
            critic_loss: Some(critic_loss),
        },
    ))
}

/// The GRPO objective for a batch of groups at the given parameters: mean
/// over groups of the grouped clipped surrogate, minus `β` times the mean
/// exact KL to the reference over every state in the batch.
pub fn grpo_objective_batch<P: TrainablePolicy>(
    groups: &[GroupSample],
    actor: &P,
    reference: &P,
    config: &TrainerConfig,
) -> Result<f64, RlError> {
    if groups.is_empty() {
        return Err(RlError::EmptyBatch);
    }
    config.validate(true)?;
    let mut surrogate = 0.0;
    let mut kl_sum = 0.0;
    let mut state_count = 0usize;
    for group in groups {
        let advantages = group_advantages(&group.rewards())?;
        let g = group.group_size() as f64;
        for (candidate, advantage) in group.candidates.iter().zip(&advantages) {
            let (rho, _) = trajectory_ratio(candidate, actor)?;
            surrogate += clipped_surrogate(rho, *advantage, config.epsilon) / g;
            for step in &candidate.steps {
                let (kl, _) = actor.state_kl(reference, step)?;
                kl_sum += kl;
                state_count += 1;
            }
        }
    }
    let surrogate = surrogate / groups.len() as f64;
    let kl = if state_count > 0 { kl_sum / state_count as f64 } else { 0.0 };
    Ok(surrogate - config.beta * kl)
}

/// One GRPO step: ascends the grouped surrogate with standardized
/// advantages and the KL penalty. No critic exists in this path.
pub fn grpo_update_step<P: TrainablePolicy>(
    groups: &[GroupSample],
    actor: &P,
    reference: &P,
    config: &TrainerConfig,
) -> Result<(P, StepDiagnostics), RlError> {
    if groups.is_empty() {
        return Err(RlError::EmptyBatch);
    }
    config.validate(true)?;
    let n_groups = groups.len() as f64;
    let dim = actor.flat_params().len();
    let mut grad = vec![0.0; dim];
    let mut surrogate = 0.0;
    let mut ratio_sum = 0.0;
    let mut clipped_count = 0usize;
    let mut candidate_count = 0usize;
    let mut reward_sum = 0.0;
    let mut kl_sum = 0.0;
    let mut kl_grad = vec![0.0; dim];
    let mut state_count = 0usize;

    for group in groups {
        let advantages = group_advantages(&group.rewards())?;
        let g = group.group_size() as f64;
        for (candidate, advantage) in group.candidates.iter().zip(&advantages) {
            let (rho, _) = trajectory_ratio(candidate, actor)?;
            let term = surrogate_term(rho, *advantage, config.epsilon);
            surrogate += term.value / g;
            ratio_sum += rho;
            if rho < 1.0 - config.epsilon || rho > 1.0 + config.epsilon {
                clipped_count += 1;
            }
            candidate_count += 1;
            reward_sum += candidate.reward;

            if term.pass_gradient && *advantage != 0.0 {
                let glp = trajectory_grad_log_prob(candidate, actor)?;
                for (acc, dlp) in grad.iter_mut().zip(&glp) {
                    *acc += advantage * term.rho * dlp / (g * n_groups);
                }
            }
            for step in &candidate.steps {
                let (kl, dkl) = actor.state_kl(reference, step)?;
                kl_sum += kl;
                for (acc, d) in kl_grad.iter_mut().zip(&dkl) {
                    *acc += d;
                }
                state_count += 1;
            }
        }
    }

    let kl = if state_count > 0 { kl_sum / state_count as f64 } else { 0.0 };
    if state_count > 0 {
        for (acc, d) in grad.iter_mut().zip(&kl_grad) {
            *acc -= config.beta * d / state_count as f64;
        }
    }
    assert_finite(&grad)?;

    let updated: Vec<f64> = actor
        .flat_params()
        .iter()
        .zip(&grad)
        .map(|(p, g)| p + config.actor_lr * g)
        .collect();
    assert_finite(&updated)?;
    let mut new_actor = actor.clone();
    new_actor.set_flat_params(&updated);

    Ok((
        new_actor,
        StepDiagnostics {
            mean_reward: reward_sum / candidate_count as f64,
            mean_ratio: ratio_sum / candidate_count as f64,
            clip_fraction: clipped_count as f64 / candidate_count as f64,
            objective: surrogate / n_groups - config.beta * kl,
            kl: Some(kl),
            critic_loss: None,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{
        AnswerPolicyParameters, AnswerRule, OperationPolicyParameters, PolicyStep,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_op_params(rng: &mut ChaCha8Rng, scale: f64) -> OperationPolicyParameters {
        let mut p = OperationPolicyParameters::zeros();
        p.set_flat_params(&(0..24).map(|_| rng.gen_range(-scale..scale)).collect::<Vec<_>>());
        p
    }

    fn random_op_step(rng: &mut ChaCha8Rng) -> PolicyStep {
        PolicyStep::Operation {
            features: (0..6).map(|_| rng.gen_range(0.0..1.0)).collect(),
            action: rng.gen_range(0..4),
        }
    }

    fn random_trajectory(
        rng: &mut ChaCha8Rng,
        behavior: &OperationPolicyParameters,
        n_steps: usize,
    ) -> Trajectory {
        use crate::rl::TrainablePolicy;
        let steps: Vec<PolicyStep> = (0..n_steps).map(|_| random_op_step(rng)).collect();
        let lp_old: f64 = steps.iter().map(|s| behavior.step_log_prob(s).unwrap()).sum();
        Trajectory {
            state_features: match &steps[0] {
                PolicyStep::Operation { features, .. } => features.clone(),
                _ => unreachable!(),
            },
            steps,
            reward: if rng.gen_bool(0.5) { 1.0 } else { 0.0 },
            log_prob_old: Some(lp_old),
        }
    }

    #[test]
    fn zero_advantage_batch_leaves_actor_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let actor = random_op_params(&mut rng, 0.5);
        let traj = random_trajectory(&mut rng, &actor, 1);
        // Critic that exactly predicts the reward: zero advantage.
        let mut critic = CriticParameters::zeros(6);
        let norm: f64 = traj.state_features.iter().map(|x| x * x).sum();
        for (w, x) in critic.weights.iter_mut().zip(&traj.state_features) {
            *w = traj.reward * x / norm;
        }
        let config = TrainerConfig { actor_lr: 0.1, ..TrainerConfig::default() };
        let (new_actor, _, _) = ppo_update_step(&[traj], &actor, &critic, &config).unwrap();
        for (a, b) in new_actor.flat_params().iter().zip(actor.flat_params()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn grpo_at_old_policy_with_zero_beta_equals_mean_advantage() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let actor = random_op_params(&mut rng, 0.5);
        let t1 = Trajectory { reward: 1.0, ..random_trajectory(&mut rng, &actor, 1) };
        let mut t2 = random_trajectory(&mut rng, &actor, 1);
        t2.reward = 0.0;
        t2.state_features = t1.state_features.clone();
        let group = GroupSample::new(vec![t1, t2]).unwrap();
        let config = TrainerConfig { beta: 0.0, ..TrainerConfig::default() };
        let objective =
            crate::rl::grpo_objective(&group, &actor, &actor.clone(), &config).unwrap();
        // Advantages are (1, −1); all ratios are 1; mean is 0.
        assert!(objective.abs() < 1e-12, "{objective}");
    }

    #[test]
    fn grpo_objective_unchanged_by_kl_when_params_equal_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let actor = random_op_params(&mut rng, 0.8);
        let t1 = Trajectory { reward: 1.0, ..random_trajectory(&mut rng, &actor, 2) };
        let mut t2 = random_trajectory(&mut rng, &actor, 2);
        t2.reward = 0.0;
        t2.state_features = t1.state_features.clone();
        let group = GroupSample::new(vec![t1, t2]).unwrap();
        let with_kl = TrainerConfig { beta: 5.0, ..TrainerConfig::default() };
        let without_kl = TrainerConfig { beta: 0.0, ..TrainerConfig::default() };
        let a = crate::rl::grpo_objective(&group, &actor, &actor.clone(), &with_kl).unwrap();
        let b = crate::rl::grpo_objective(&group, &actor, &actor.clone(), &without_kl).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn grpo_objective_matches_straight_line_reimplementation() {
        use crate::rl::TrainablePolicy;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let behavior = random_op_params(&mut rng, 0.6);
            let actor = random_op_params(&mut rng, 0.6);
            let reference = random_op_params(&mut rng, 0.6);
            let shared = random_op_step(&mut rng);
            let state = match &shared {
                PolicyStep::Operation { features, .. } => features.clone(),
                _ => unreachable!(),
            };
            let candidates: Vec<Trajectory> = (0..4)
                .map(|i| {
                    let steps = vec![random_op_step(&mut rng)];
                    let lp_old =
                        steps.iter().map(|s| behavior.step_log_prob(s).unwrap()).sum::<f64>();
                    Trajectory {
                        state_features: state.clone(),
                        steps,
                        reward: (i % 2) as f64,
                        log_prob_old: Some(lp_old),
                    }
                })
                .collect();
            let group = GroupSample::new(candidates.clone()).unwrap();
            let config = TrainerConfig { beta: 0.037, ..TrainerConfig::default() };
            let fast = crate::rl::grpo_objective(&group, &actor, &reference, &config).unwrap();

            // Naive re-derivation, independent arithmetic path.
            let rewards: Vec<f64> = candidates.iter().map(|c| c.reward).collect();
            let mean = rewards.iter().sum::<f64>() / 4.0;
            let std =
                (rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / 4.0).sqrt();
            let mut total = 0.0;
            let mut kls = Vec::new();
            for c in &candidates {
                let adv = (c.reward - mean) / std;
                let lp_new: f64 =
                    c.steps.iter().map(|s| actor.step_log_prob(s).unwrap()).sum();
                let rho = (lp_new - c.log_prob_old.unwrap()).exp();
                let clipped = rho.clamp(0.8, 1.2);
                total += (rho * adv).min(clipped * adv) / 4.0;
                for s in &c.steps {
                    kls.push(actor.state_kl(&reference, s).unwrap().0);
                }
            }
            let naive = total - 0.037 * kls.iter().sum::<f64>() / kls.len() as f64;
            assert!((fast - naive).abs() < 1e-10, "{fast} vs {naive}");
        }
    }

    #[test]
    fn degenerate_groups_only_move_via_kl() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let actor = random_op_params(&mut rng, 0.5);
        let reference = random_op_params(&mut rng, 0.5);
        let shared = random_trajectory(&mut rng, &actor, 1);
        let mut flat_reward = shared.clone();
        flat_reward.reward = 1.0;
        let mut flat_reward2 = shared.clone();
        flat_reward2.reward = 1.0;
        let group = GroupSample::new(vec![flat_reward, flat_reward2]).unwrap();

        let no_kl = TrainerConfig { beta: 0.0, actor_lr: 0.5, ..TrainerConfig::default() };
        let (new_actor, diag) = grpo_update_step(&[group.clone()], &actor, &reference, &no_kl).unwrap();
        assert_eq!(new_actor.flat_params(), actor.flat_params());
        assert_eq!(diag.clip_fraction, 0.0);

        let with_kl = TrainerConfig { beta: 1.0, actor_lr: 0.5, ..TrainerConfig::default() };
        let (moved, diag) = grpo_update_step(&[group], &actor, &reference, &with_kl).unwrap();
        assert!(diag.kl.unwrap() > 0.0);
        assert_ne!(moved.flat_params(), actor.flat_params());
    }

    #[test]
    fn missing_log_prob_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let actor = random_op_params(&mut rng, 0.5);
        let mut t = random_trajectory(&mut rng, &actor, 1);
        t.log_prob_old = None;
        let critic = CriticParameters::zeros(6);
        let err =
            ppo_update_step(&[t], &actor, &critic, &TrainerConfig::default()).unwrap_err();
        assert_eq!(err, RlError::MissingLogProb);
    }

    #[test]
    fn ppo_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for case in 0..30 {
            let behavior = random_op_params(&mut rng, 0.7);
            let actor = random_op_params(&mut rng, 0.7);
            let batch: Vec<Trajectory> =
                (0..4).map(|_| random_trajectory(&mut rng, &behavior, 2)).collect();
            let critic = CriticParameters {
                weights: (0..6).map(|_| rng.gen_range(-0.5..0.5)).collect(),
            };
            let config = TrainerConfig { actor_lr: 1.0, critic_lr: 0.0, ..TrainerConfig::default() };

            let (updated, _, _) = ppo_update_step(&batch, &actor, &critic, &config).unwrap();
            let analytic: Vec<f64> = updated
                .flat_params()
                .iter()
                .zip(actor.flat_params())
                .map(|(n, o)| n - o)
                .collect();

            let h = 1e-5;
            let flat = actor.flat_params();
            for j in 0..flat.len() {
                let mut plus = actor.clone();
                let mut minus = actor.clone();
                let mut fp = flat.clone();
                fp[j] += h;
                plus.set_flat_params(&fp);
                fp[j] -= 2.0 * h;
                minus.set_flat_params(&fp);
                let numeric = (ppo_objective(&batch, &plus, &critic, &config).unwrap()
                    - ppo_objective(&batch, &minus, &critic, &config).unwrap())
                    / (2.0 * h);
                let denom = numeric.abs().max(analytic[j].abs()).max(1e-8);
                assert!(
                    (numeric - analytic[j]).abs() / denom < 1e-4,
                    "case {case} param {j}: numeric {numeric} vs analytic {}",
                    analytic[j]
                );
            }
        }
    }

    #[test]
    fn grpo_gradient_matches_finite_differences_for_answer_policy() {
        use crate::rl::TrainablePolicy;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for case in 0..10 {
            let mut behavior = AnswerPolicyParameters::zeros(AnswerRule::ValueField);
            behavior.set_flat_params(
                &(0..4).map(|_| rng.gen_range(-0.5..0.5)).collect::<Vec<_>>(),
            );
            let mut actor = AnswerPolicyParameters::zeros(AnswerRule::ValueField);
            actor
                .set_flat_params(&(0..4).map(|_| rng.gen_range(-0.5..0.5)).collect::<Vec<_>>());
            let mut reference = AnswerPolicyParameters::zeros(AnswerRule::ValueField);
            reference
                .set_flat_params(&(0..4).map(|_| rng.gen_range(-0.5..0.5)).collect::<Vec<_>>());

            let state: Vec<Vec<f64>> = (0..5)
                .map(|_| (0..4).map(|_| rng.gen_range(0.0..1.0)).collect())
                .collect();
            let candidates: Vec<Trajectory> = (0..4)
                .map(|i| {
                    let step = PolicyStep::Distillation {
                        memory_features: state.clone(),
                        included: (0..5).map(|_| rng.gen_bool(0.5)).collect(),
                    };
                    let lp_old = behavior.step_log_prob(&step).unwrap();
                    Trajectory {
                        state_features: vec![1.0],
                        steps: vec![step],
                        reward: (i % 2) as f64,
                        log_prob_old: Some(lp_old),
                    }
                })
                .collect();
            let group = GroupSample::new(candidates).unwrap();
            let config = TrainerConfig {
                beta: 0.05,
                actor_lr: 1.0,
                ..TrainerConfig::default()
            };
            let (updated, _) =
                grpo_update_step(&[group.clone()], &actor, &reference, &config).unwrap();
            let analytic: Vec<f64> = updated
                .flat_params()
                .iter()
                .zip(actor.flat_params())
                .map(|(n, o)| n - o)
                .collect();

            let h = 1e-5;
            let flat = actor.flat_params();
            for j in 0..flat.len() {
                let mut plus = actor.clone();
                let mut minus = actor.clone();
                let mut fp = flat.clone();
                fp[j] += h;
                plus.set_flat_params(&fp);
                fp[j] -= 2.0 * h;
                minus.set_flat_params(&fp);
                let numeric =
                    (grpo_objective_batch(&[group.clone()], &plus, &reference, &config).unwrap()
                        - grpo_objective_batch(&[group.clone()], &minus, &reference, &config)
                            .unwrap())
                        / (2.0 * h);
                let denom = numeric.abs().max(analytic[j].abs()).max(1e-8);
                assert!(
                    (numeric - analytic[j]).abs() / denom < 1e-4,
                    "case {case} param {j}: numeric {numeric} vs analytic {}",
                    analytic[j]
                );
            }
        }
    }

    #[test]
    fn ppo_and_grpo_gradients_align_when_critic_predicts_mean() {
        // With V(s) fixed to the group's mean reward and β = 0, PPO's
        // advantages are the unstandardized GRPO ones, so the two update
        // directions coincide up to the 1/std scale.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let behavior = random_op_params(&mut rng, 0.5);
            let actor = random_op_params(&mut rng, 0.5);
            let shared = random_trajectory(&mut rng, &behavior, 1);
            let candidates: Vec<Trajectory> = (0..4)
                .map(|i| {
                    let mut t = random_trajectory(&mut rng, &behavior, 1);
                    t.state_features = shared.state_features.clone();
                    t.reward = if i < 2 { 1.0 } else { 0.0 };
                    t
                })
                .collect();
            let group = GroupSample::new(candidates.clone()).unwrap();

            let mean = 0.5;
            let norm: f64 = shared.state_features.iter().map(|x| x * x).sum();
            let critic = CriticParameters {
                weights: shared.state_features.iter().map(|x| mean * x / norm).collect(),
            };

            let config = TrainerConfig {
                beta: 0.0,
                actor_lr: 1.0,
                critic_lr: 0.0,
                ..TrainerConfig::default()
            };
            let (grpo_actor, _) =
                grpo_update_step(&[group], &actor, &actor.clone(), &config).unwrap();
            let (ppo_actor, _, _) = ppo_update_step(&candidates, &actor, &critic, &config).unwrap();

            let grpo_dir: Vec<f64> = grpo_actor
                .flat_params()
                .iter()
                .zip(actor.flat_params())
                .map(|(n, o)| n - o)
                .collect();
            let ppo_dir: Vec<f64> = ppo_actor
                .flat_params()
                .iter()
                .zip(actor.flat_params())
                .map(|(n, o)| n - o)
                .collect();
            let dot: f64 = grpo_dir.iter().zip(&ppo_dir).map(|(a, b)| a * b).sum();
            let ng: f64 = grpo_dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            let np: f64 = ppo_dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            if ng > 1e-12 && np > 1e-12 {
                let cosine = dot / (ng * np);
                assert!(cosine > 1.0 - 1e-9, "directions diverge: cosine {cosine}");
            }
        }
    }
}
