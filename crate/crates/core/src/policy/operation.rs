//! The parametric memory-manager policy: a linear-softmax distribution over
//! the four operations.

use rand::RngCore;

use super::features::{operation_features, OP_FEATURE_COUNT, OP_FEATURE_NAMES};
use super::{stable_softmax, ManagerDecision, ManagerPolicy, PolicyError, PolicySample, PolicyStep};
use crate::memory::{DecisionKind, MemoryOperationDecision};
use crate::pipeline::ExtractedFact;
use crate::retrieval::RetrievedItem;

pub const OPERATION_COUNT: usize = 4;

/// UPDATE content rule: append-consolidate the fact onto the superseded
/// text. LLM-backed managers compose content themselves instead.
pub fn compose_update_text(old_text: &str, fact_text: &str) -> String {
    format!("{old_text}; {fact_text}")
}

/// Weight matrix mapping state features to operation logits, row per
/// operation in canonical order. All weights stay finite; updates produce
/// new versions (copy-on-write).
#[derive(Debug, Clone, PartialEq)]
pub struct OperationPolicyParameters {
    weights: Vec<f64>,
    feature_names: Vec<String>,
    version: u64,
}

impl Default for OperationPolicyParameters {
    fn default() -> Self {
        Self::zeros()
    }
}

impl OperationPolicyParameters {
    /// All-zero weights over the default feature spec: the uniform policy.
    pub fn zeros() -> Self {
        Self {
            weights: vec![0.0; OPERATION_COUNT * OP_FEATURE_COUNT],
            feature_names: OP_FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            version: 0,
        }
    }

    pub fn from_rows(rows: [[f64; OP_FEATURE_COUNT]; OPERATION_COUNT]) -> Self {
        let mut params = Self::zeros();
        params.weights = rows.iter().flat_map(|r| r.iter().copied()).collect();
        params.assert_finite();
        params
    }

    /// Weak prior mirroring the manager instructions: add new information,
    /// update when the fact restates an existing entry, delete on
    /// contradiction, otherwise leave alone. Deliberately soft — the greedy
    /// argmax is still ADD in every state, so an untrained policy behaves
    /// like a naive accumulator — but τ = 1 sampling explores the
    /// instructed operations where their cues fire. This is the desk-scale
    /// stand-in for starting RL from an instruction-following model rather
    /// than from noise.
    pub fn instruction_prior() -> Self {
        // feature order: max_sim, mean_sim, best_overlap, negation,
        // bank_empty, bias
        Self::from_rows([
            [0.0, 0.0, 0.0, 0.0, 1.0, 0.5],   // ADD
            [1.0, 0.0, 2.0, 0.0, 0.0, -2.1],  // UPDATE
            [0.5, 0.0, 0.0, 2.5, 0.0, -2.6],  // DELETE
            [0.0, 0.0, 1.0, 0.0, 0.0, -1.5],  // NOOP
        ])
    }

    pub(crate) fn from_parts(
        weights: Vec<f64>,
        feature_names: Vec<String>,
        version: u64,
    ) -> Result<Self, PolicyError> {
        if weights.len() != OPERATION_COUNT * feature_names.len() {
            return Err(PolicyError::ParamsFile(format!(
                "weight count {} does not match 4 x {}",
                weights.len(),
                feature_names.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(PolicyError::ParamsFile("non-finite weight".into()));
        }
        Ok(Self { weights, feature_names, version })
    }

    fn assert_finite(&self) {
        assert!(self.weights.iter().all(|w| w.is_finite()), "weights must be finite");
    }

    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Replaces the weight vector, bumping the version.
    pub fn set_weights(&mut self, weights: Vec<f64>) {
        assert_eq!(weights.len(), self.weights.len(), "weight shape is fixed");
        assert!(weights.iter().all(|w| w.is_finite()), "weights must be finite");
        self.weights = weights;
        self.version += 1;
    }

    pub fn set_weight(&mut self, operation: DecisionKind, feature: usize, value: f64) {
        assert!(value.is_finite());
        let f = self.feature_count();
        self.weights[operation.index() * f + feature] = value;
        self.version += 1;
    }

    pub fn logits(&self, features: &[f64]) -> [f64; OPERATION_COUNT] {
        assert_eq!(features.len(), self.feature_count(), "feature dimension mismatch");
        let f = self.feature_count();
        let mut out = [0.0; OPERATION_COUNT];
        for (op, slot) in out.iter_mut().enumerate() {
            *slot = self.weights[op * f..(op + 1) * f]
                .iter()
                .zip(features)
                .map(|(w, x)| w * x)
                .sum();
        }
        out
    }

    /// Probability vector over operations at temperature `tau`. `tau = 0`
    /// is the greedy one-hot limit, ties to the lowest operation index.
    pub fn distribution(&self, features: &[f64], tau: f64) -> [f64; OPERATION_COUNT] {
        assert!(tau >= 0.0, "temperature must be non-negative");
        let logits = self.logits(features);
        if tau == 0.0 {
            let argmax = greedy_index(&logits);
            let mut one_hot = [0.0; OPERATION_COUNT];
            one_hot[argmax] = 1.0;
            return one_hot;
        }
        let scaled: Vec<f64> = logits.iter().map(|z| z / tau).collect();
        let probs = stable_softmax(&scaled);
        [probs[0], probs[1], probs[2], probs[3]]
    }

    /// Distribution for a (fact, retrieval) state at `tau = 1`.
    pub fn op_distribution(&self, fact: &ExtractedFact, retrieved: &[RetrievedItem]) -> [f64; 4] {
        self.distribution(&operation_features(fact, retrieved), 1.0)
    }

    /// Exact log-probability of choosing `kind` in the given state.
    pub fn log_prob(
        &self,
        kind: DecisionKind,
        features: &[f64],
        tau: f64,
    ) -> Result<f64, PolicyError> {
        let dist = self.distribution(features, tau);
        let p = dist[kind.index()];
        if p <= 0.0 {
            return Err(PolicyError::ImpossibleAction(format!(
                "{kind} has probability 0 at tau {tau}"
            )));
        }
        Ok(p.ln())
    }

    /// Samples one decision, returning the replayable step record alongside.
    ///
    /// Targeted operations act on the best-ranked retrieved entry. An
    /// UPDATE or DELETE drawn with nothing retrieved is demoted to ADD (no
    /// target exists); the step records the operation actually *sampled*,
    /// which is what the ratio in the surrogate objective is over.
    pub fn sample_with_step(
        &self,
        fact: &ExtractedFact,
        retrieved: &[RetrievedItem],
        tau: f64,
        rng: &mut dyn RngCore,
    ) -> (PolicySample<MemoryOperationDecision>, PolicyStep) {
        let features = operation_features(fact, retrieved);
        let dist = self.distribution(&features, tau);
        let index = if tau == 0.0 {
            greedy_index(&self.logits(&features))
        } else {
            sample_categorical(&dist, rng)
        };
        let log_prob = if tau == 0.0 { 0.0 } else { dist[index].ln() };

        let sampled_kind = DecisionKind::ALL[index];
        let decision = match sampled_kind {
            DecisionKind::Add => MemoryOperationDecision::add(fact.text.clone()),
            DecisionKind::Update => match retrieved.first() {
                Some(best) => MemoryOperationDecision::update(
                    best.id,
                    compose_update_text(&best.text, &fact.text),
                )
                .with_old_text(best.text.clone()),
                None => {
                    log::debug!("UPDATE sampled with empty retrieval; demoting to ADD");
                    MemoryOperationDecision::add(fact.text.clone())
                }
            },
            DecisionKind::Delete => match retrieved.first() {
                Some(best) => {
                    MemoryOperationDecision::delete(best.id).with_old_text(best.text.clone())
                }
                None => {
                    log::debug!("DELETE sampled with empty retrieval; demoting to ADD");
                    MemoryOperationDecision::add(fact.text.clone())
                }
            },
            DecisionKind::Noop => MemoryOperationDecision::noop(),
        };

        (
            PolicySample { action: decision, log_prob: Some(log_prob), temperature: tau },
            PolicyStep::Operation { features, action: index },
        )
    }
}

fn greedy_index(logits: &[f64; OPERATION_COUNT]) -> usize {
    let mut best = 0;
    for (i, z) in logits.iter().enumerate().skip(1) {
        if *z > logits[best] {
            best = i;
        }
    }
    best
}

fn sample_categorical(probs: &[f64; OPERATION_COUNT], rng: &mut dyn RngCore) -> usize {
    let draw = rand::Rng::gen::<f64>(rng);
    let mut cumulative = 0.0;
    for (i, p) in probs.iter().enumerate() {
        cumulative += p;
        if draw < cumulative {
            return i;
        }
    }
    OPERATION_COUNT - 1
}

impl ManagerPolicy for OperationPolicyParameters {
    fn decide(
        &self,
        fact: &ExtractedFact,
        retrieved: &[RetrievedItem],
        temperature: f64,
        rng: &mut dyn RngCore,
    ) -> Result<ManagerDecision, PolicyError> {
        let (sample, _) = self.sample_with_step(fact, retrieved, temperature, rng);
        Ok(ManagerDecision {
            decisions: vec![sample.action],
            log_prob: sample.log_prob,
            temperature,
        })
    }
}
