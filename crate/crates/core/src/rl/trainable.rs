//! Differentiable-policy contract: exact log-probabilities, their
//! gradients, and exact per-state KL against a reference, all over a flat
//! parameter vector. Both desk-scale policies implement it; the PPO and
//! GRPO update steps are written once against this trait.
//!
//! Everything here is at the training temperature (τ = 1).

use super::RlError;
use crate::policy::{AnswerPolicyParameters, OperationPolicyParameters, PolicyStep};

pub trait TrainablePolicy: Clone + Send + Sync {
    fn flat_params(&self) -> Vec<f64>;
    fn set_flat_params(&mut self, flat: &[f64]);
    /// `log π(action | state)` for a recorded step.
    fn step_log_prob(&self, step: &PolicyStep) -> Result<f64, RlError>;
    /// `∇_θ log π(action | state)`, flat layout matching `flat_params`.
    fn step_grad_log_prob(&self, step: &PolicyStep) -> Result<Vec<f64>, RlError>;
    /// Exact `D_KL[π_self ‖ π_reference]` at the step's state, with its
    /// gradient with respect to `self`'s parameters.
    fn state_kl(&self, reference: &Self, step: &PolicyStep) -> Result<(f64, Vec<f64>), RlError>;
}

fn softmax_from_logits(logits: &[f64; 4]) -> [f64; 4] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut exps = [0.0; 4];
    let mut sum = 0.0;
    for (e, z) in exps.iter_mut().zip(logits) {
        *e = (z - max).exp();
        sum += *e;
    }
    for e in &mut exps {
        *e /= sum;
    }
    exps
}

impl TrainablePolicy for OperationPolicyParameters {
    fn flat_params(&self) -> Vec<f64> {
        self.weights().to_vec()
    }

    fn set_flat_params(&mut self, flat: &[f64]) {
        self.set_weights(flat.to_vec());
    }

    fn step_log_prob(&self, step: &PolicyStep) -> Result<f64, RlError> {
        let PolicyStep::Operation { features, action } = step else {
            return Err(RlError::StepKindMismatch);
        };
        let probs = softmax_from_logits(&self.logits(features));
        Ok(probs[*action].ln())
    }

    fn step_grad_log_prob(&self, step: &PolicyStep) -> Result<Vec<f64>, RlError> {
        let PolicyStep::Operation { features, action } = step else {
            return Err(RlError::StepKindMismatch);
        };
        let probs = softmax_from_logits(&self.logits(features));
        let f = features.len();
        let mut grad = vec![0.0; 4 * f];
        for op in 0..4 {
            let coeff = if op == *action { 1.0 - probs[op] } else { -probs[op] };
            for (j, x) in features.iter().enumerate() {
                grad[op * f + j] = coeff * x;
            }
        }
        Ok(grad)
    }

    fn state_kl(&self, reference: &Self, step: &PolicyStep) -> Result<(f64, Vec<f64>), RlError> {
        let PolicyStep::Operation { features, .. } = step else {
            return Err(RlError::StepKindMismatch);
        };
        let p = softmax_from_logits(&self.logits(features));
        let q = softmax_from_logits(&reference.logits(features));
        let mut kl = 0.0;
        for a in 0..4 {
            kl += p[a] * (p[a].ln() - q[a].ln());
        }
        // d KL / d z_k = p_k ((ln p_k − ln q_k) − KL)
        let f = features.len();
        let mut grad = vec![0.0; 4 * f];
        for k in 0..4 {
            let dz = p[k] * ((p[k].ln() - q[k].ln()) - kl);
            for (j, x) in features.iter().enumerate() {
                grad[k * f + j] = dz * x;
            }
        }
        Ok((kl, grad))
    }
}

fn sigma(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl TrainablePolicy for AnswerPolicyParameters {
    fn flat_params(&self) -> Vec<f64> {
        self.selection_weights().to_vec()
    }

    fn set_flat_params(&mut self, flat: &[f64]) {
        self.set_selection_weights(flat.to_vec());
    }

    fn step_log_prob(&self, step: &PolicyStep) -> Result<f64, RlError> {
        let PolicyStep::Distillation { memory_features, included } = step else {
            return Err(RlError::StepKindMismatch);
        };
        let mut lp = 0.0;
        for (features, inc) in memory_features.iter().zip(included) {
            let p = sigma(self.inclusion_score(features)).clamp(1e-12, 1.0 - 1e-12);
            lp += if *inc { p.ln() } else { (1.0 - p).ln() };
        }
        Ok(lp)
    }

    fn step_grad_log_prob(&self, step: &PolicyStep) -> Result<Vec<f64>, RlError> {
        let PolicyStep::Distillation { memory_features, included } = step else {
            return Err(RlError::StepKindMismatch);
        };
        let mut grad = vec![0.0; self.selection_weights().len()];
        for (features, inc) in memory_features.iter().zip(included) {
            let p = sigma(self.inclusion_score(features));
            let coeff = if *inc { 1.0 - p } else { -p };
            for (g, x) in grad.iter_mut().zip(features) {
                *g += coeff * x;
            }
        }
        Ok(grad)
    }

    fn state_kl(&self, reference: &Self, step: &PolicyStep) -> Result<(f64, Vec<f64>), RlError> {
        let PolicyStep::Distillation { memory_features, .. } = step else {
            return Err(RlError::StepKindMismatch);
        };
        let mut kl = 0.0;
        let mut grad = vec![0.0; self.selection_weights().len()];
        for features in memory_features {
            let s = self.inclusion_score(features);
            let s_ref = reference.inclusion_score(features);
            let p = sigma(s).clamp(1e-12, 1.0 - 1e-12);
            let q = sigma(s_ref).clamp(1e-12, 1.0 - 1e-12);
            kl += p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln();
            // d/ds [KL] = σ'(s) (s − s_ref), with σ'(s) = p (1 − p).
            let ds = p * (1.0 - p) * (s - s_ref);
            for (g, x) in grad.iter_mut().zip(features) {
                *g += ds * x;
            }
        }
        Ok((kl, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::AnswerRule;

    fn op_step(features: Vec<f64>, action: usize) -> PolicyStep {
        PolicyStep::Operation { features, action }
    }

    #[test]
    fn op_log_prob_matches_distribution() {
        let params = OperationPolicyParameters::from_rows([
            [0.5, -0.1, 0.3, 0.0, 0.2, 0.1],
            [-0.2, 0.4, 0.0, 0.6, -0.5, 0.0],
            [0.1, 0.1, -0.3, 0.2, 0.0, -0.1],
            [0.0, -0.4, 0.2, -0.2, 0.3, 0.5],
        ]);
        let features = vec![0.7, 0.3, 0.5, 1.0, 0.0, 1.0];
        for action in 0..4 {
            let lp = params.step_log_prob(&op_step(features.clone(), action)).unwrap();
            let dist = params.distribution(&features, 1.0);
            assert!((lp.exp() - dist[action]).abs() < 1e-12);
        }
    }

    #[test]
    fn grad_log_prob_matches_finite_differences() {
        let params = OperationPolicyParameters::from_rows([
            [0.5, -0.1, 0.3, 0.0, 0.2, 0.1],
            [-0.2, 0.4, 0.0, 0.6, -0.5, 0.0],
            [0.1, 0.1, -0.3, 0.2, 0.0, -0.1],
            [0.0, -0.4, 0.2, -0.2, 0.3, 0.5],
        ]);
        let step = op_step(vec![0.7, 0.3, 0.5, 1.0, 0.0, 1.0], 2);
        let grad = params.step_grad_log_prob(&step).unwrap();
        let h = 1e-6;
        let flat = params.flat_params();
        for j in 0..flat.len() {
            let mut plus = params.clone();
            let mut minus = params.clone();
            let mut fp = flat.clone();
            fp[j] += h;
            plus.set_flat_params(&fp);
            fp[j] -= 2.0 * h;
            minus.set_flat_params(&fp);
            let numeric = (plus.step_log_prob(&step).unwrap()
                - minus.step_log_prob(&step).unwrap())
                / (2.0 * h);
            assert!((numeric - grad[j]).abs() < 1e-6, "param {j}: {numeric} vs {}", grad[j]);
        }
    }

    #[test]
    fn kl_zero_for_identical_params_and_matches_hand_value() {
        let params = OperationPolicyParameters::zeros();
        let step = op_step(vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0], 0);
        let (kl, grad) = params.state_kl(&params.clone(), &step).unwrap();
        assert_eq!(kl, 0.0);
        assert!(grad.iter().all(|g| g.abs() < 1e-15));

        // Near-deterministic vs uniform: KL approaches ln 4.
        let mut peaked = OperationPolicyParameters::zeros();
        peaked.set_weight(crate::memory::DecisionKind::Add, 5, 40.0);
        let (kl, _) = peaked.state_kl(&OperationPolicyParameters::zeros(), &step).unwrap();
        assert!((kl - 4.0f64.ln()).abs() < 1e-10, "{kl}");
    }

    #[test]
    fn kl_non_negative_for_random_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let mut a = OperationPolicyParameters::zeros();
            let mut b = OperationPolicyParameters::zeros();
            a.set_flat_params(&(0..24).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<_>>());
            b.set_flat_params(&(0..24).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<_>>());
            let features: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..1.0)).collect();
            let (kl, _) = a.state_kl(&b, &op_step(features, 0)).unwrap();
            assert!(kl >= -1e-12, "KL {kl} negative");
        }
    }

    #[test]
    fn answer_policy_grad_matches_finite_differences() {
        let params = AnswerPolicyParameters::with_weights(
            [0.4, -0.3, 0.7, 0.1],
            AnswerRule::ValueField,
        );
        let step = PolicyStep::Distillation {
            memory_features: vec![
                vec![0.9, 0.5, 1.0, 1.0],
                vec![0.2, 0.1, 0.0, 1.0],
                vec![0.6, 0.8, 0.5, 1.0],
            ],
            included: vec![true, false, true],
        };
        let grad = params.step_grad_log_prob(&step).unwrap();
        let h = 1e-6;
        let flat = params.flat_params();
        for j in 0..flat.len() {
            let mut plus = params.clone();
            let mut minus = params.clone();
            let mut fp = flat.clone();
            fp[j] += h;
            plus.set_flat_params(&fp);
            fp[j] -= 2.0 * h;
            minus.set_flat_params(&fp);
            let numeric = (plus.step_log_prob(&step).unwrap()
                - minus.step_log_prob(&step).unwrap())
                / (2.0 * h);
            assert!((numeric - grad[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn mismatched_step_kind_is_rejected() {
        let op = OperationPolicyParameters::zeros();
        let step = PolicyStep::Distillation { memory_features: vec![], included: vec![] };
        assert_eq!(op.step_log_prob(&step).unwrap_err(), RlError::StepKindMismatch);
    }
}
