//! End-to-end flows: fact extraction, memory-bank construction,
//! memory-augmented answering, the two training loops, and evaluation.

mod answer;
mod construct;
mod evaluate;
mod extract;
mod train;

pub use answer::answer_question;
pub use construct::{construct_memory_bank, ConstructionTrace, TraceRecord};
pub use evaluate::{evaluate, evaluate_episode, EvalOptions, EpisodeResult};
pub use extract::{ExtractedFact, FactExtractor, LlmExtractor, RuleExtractor};
pub use train::{
    greedy_answer_em, greedy_manager_em, train_answer_agent, train_memory_manager,
    ManagerEpisode, RewardCurvePoint, TrainerKind, TrainingArtifacts,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("extractor unavailable: {0}")]
    ExtractorUnavailable(String),
    #[error(transparent)]
    Policy(#[from] crate::policy::PolicyError),
    #[error(transparent)]
    Memory(#[from] crate::memory::MemoryError),
    #[error(transparent)]
    Rl(#[from] crate::rl::RlError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
