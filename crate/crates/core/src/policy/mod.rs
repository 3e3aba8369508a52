//! The two stochastic policies: the memory manager (chooses one of
//! `{ADD, UPDATE, DELETE, NOOP}` per extracted fact) and the answer agent
//! (distills retrieved memories, then extracts an answer).
//!
//! Desk-scale implementations are linear-softmax / linear-Bernoulli models
//! over hand-designed features. They satisfy the full probabilistic
//! interface the RL objectives need — sample, exact log-prob, ratio, KL —
//! which is what makes the training math verifiable. LLM-backed variants
//! satisfy the same sampling contract with `log_prob` unavailable.

pub mod features;
mod answer;
mod llm;
mod operation;
mod params_io;
mod prompts;

pub use answer::{
    extract_question_span, extract_value_field, AnswerAction, AnswerPolicyParameters, AnswerRule,
    UNKNOWN_ANSWER,
};
pub use llm::{LlmAnswerPolicy, LlmManagerPolicy};
pub use operation::{compose_update_text, OperationPolicyParameters};
pub use params_io::{
    load_answer_params, load_operation_params, save_answer_params, save_operation_params,
};
pub use prompts::{
    render_answer_prompt, render_manager_prompt, ANSWER_PROMPT_HEADER, MANAGER_PROMPT_PART1,
    MANAGER_PROMPT_PART2,
};

use rand::RngCore;
use thiserror::Error;

use crate::memory::MemoryOperationDecision;
use crate::pipeline::ExtractedFact;
use crate::retrieval::RetrievedItem;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("action has probability zero under this policy: {0}")]
    ImpossibleAction(String),
    #[error("gateway failure: {0}")]
    Gateway(#[from] crate::gateway::GatewayError),
    #[error("policy output unparseable: {0}")]
    MalformedOutput(String),
    #[error("parameter file invalid: {0}")]
    ParamsFile(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One sampled action with the log-probability the sampling distribution
/// assigned to it. `log_prob` is `None` for LLM-backed policies, whose
/// exact probabilities are unavailable; such samples are excluded from
/// importance ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySample<A> {
    pub action: A,
    pub log_prob: Option<f64>,
    pub temperature: f64,
}

/// Frozen copy of policy parameters taken at training start. Immutable by
/// construction: there is no mutable access.
#[derive(Debug, Clone)]
pub struct ReferencePolicy<P: Clone> {
    params: P,
}

impl<P: Clone> ReferencePolicy<P> {
    pub fn freeze(params: &P) -> Self {
        Self { params: params.clone() }
    }

    pub fn get(&self) -> &P {
        &self.params
    }
}

/// Manager decision for one fact. LLM-backed managers may emit several
/// records per fact; the engine applies them in listed order.
#[derive(Debug, Clone, PartialEq)]
pub struct ManagerDecision {
    pub decisions: Vec<MemoryOperationDecision>,
    pub log_prob: Option<f64>,
    pub temperature: f64,
}

/// Answer for one question plus the distilled memory subset used.
#[derive(Debug, Clone, PartialEq)]
pub struct AnswerOutcome {
    pub answer: String,
    pub distilled_ids: Vec<crate::memory::MemoryId>,
    pub log_prob: Option<f64>,
    pub temperature: f64,
}

/// Bank-evolution policy contract.
pub trait ManagerPolicy: Send + Sync {
    fn decide(
        &self,
        fact: &ExtractedFact,
        retrieved: &[RetrievedItem],
        temperature: f64,
        rng: &mut dyn RngCore,
    ) -> Result<ManagerDecision, PolicyError>;
}

/// Question-answering policy contract.
pub trait AnswerPolicy: Send + Sync {
    fn answer(
        &self,
        question: &str,
        retrieved: &[RetrievedItem],
        temperature: f64,
        rng: &mut dyn RngCore,
    ) -> Result<AnswerOutcome, PolicyError>;
}

/// One recorded policy decision, sufficient to recompute its log-probability
/// and gradient under any parameter vector. This is what trainers replay.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyStep {
    /// Operation choice: state features and the sampled operation index
    /// (canonical order ADD, UPDATE, DELETE, NOOP).
    Operation { features: Vec<f64>, action: usize },
    /// Distillation: per-memory feature rows and the sampled inclusion mask.
    Distillation { memory_features: Vec<Vec<f64>>, included: Vec<bool> },
}

pub(crate) fn stable_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inclusive-range clamp keeping Bernoulli probabilities away from exact
/// 0/1 so log-probabilities stay finite.
pub(crate) fn clamp_prob(p: f64) -> f64 {
    p.clamp(1e-12, 1.0 - 1e-12)
}
