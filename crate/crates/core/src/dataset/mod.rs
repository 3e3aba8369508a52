//! Dialogue corpora: the interchange format loader, train/validation/test
//! splitting, training-tuple construction, and the synthetic environment
//! with ground-truth operations.

mod locomo;
mod synthetic;
mod tuples;

pub use locomo::{load_locomo, load_locomo_str, save_corpus, split_dataset, LoadedCorpus};
pub use synthetic::{
    generate_synthetic, load_oracle_sidecar, oracle_lookup_answer, save_oracle_sidecar,
    synthetic_manager_tuples, OracleAnswerPolicy, OracleManagerPolicy, OracleOp,
    SyntheticConfig, SyntheticCorpus, SyntheticEvent, SyntheticEventKind, SyntheticScript,
};
pub use tuples::{build_answer_tuples, build_manager_tuples, AnswerTuple, ManagerTuple};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("format error in {path} at byte {offset}: {message}")]
    FormatError { path: String, offset: usize, message: String },
    #[error("need at least 3 dialogues to split, got {0}")]
    TooFewDialogues(usize),
    #[error("extractor unavailable: {0}")]
    ExtractorUnavailable(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Reasoning category of a question. The adversarial subset is excluded at
/// load time and never reaches this enum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QuestionCategory {
    #[serde(rename = "single-hop")]
    SingleHop,
    #[serde(rename = "multi-hop")]
    MultiHop,
    #[serde(rename = "open-domain")]
    OpenDomain,
    #[serde(rename = "temporal")]
    Temporal,
}

impl QuestionCategory {
    pub const ALL: [QuestionCategory; 4] = [
        QuestionCategory::SingleHop,
        QuestionCategory::MultiHop,
        QuestionCategory::OpenDomain,
        QuestionCategory::Temporal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QuestionCategory::SingleHop => "single-hop",
            QuestionCategory::MultiHop => "multi-hop",
            QuestionCategory::OpenDomain => "open-domain",
            QuestionCategory::Temporal => "temporal",
        }
    }
}

/// One exchange inside a session. `timestamp` is the session datetime
/// string exactly as given in the source file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueTurn {
    pub turn_id: u32,
    pub speaker: String,
    pub text: String,
    pub timestamp: String,
    pub session_id: String,
}

/// Question grounded in a dialogue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAPair {
    pub question: String,
    pub gold_answer: String,
    pub category: QuestionCategory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence_turn_ids: Option<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub datetime: String,
    pub turns: Vec<DialogueTurn>,
}

/// A multi-session dialogue with its grounded questions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dialogue {
    pub dialogue_id: String,
    pub sessions: Vec<Session>,
    pub qa: Vec<QAPair>,
}

impl Dialogue {
    /// All turns across sessions, in order.
    pub fn turns(&self) -> impl Iterator<Item = &DialogueTurn> {
        self.sessions.iter().flat_map(|s| s.turns.iter())
    }

    pub fn turn_count(&self) -> usize {
        self.sessions.iter().map(|s| s.turns.len()).sum()
    }

    /// Distinct speakers in first-appearance order.
    pub fn participants(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for turn in self.turns() {
            if !out.contains(&turn.speaker.as_str()) {
                out.push(&turn.speaker);
            }
        }
        out
    }
}
