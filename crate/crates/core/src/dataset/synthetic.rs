//! Synthetic multi-session dialogues with ground-truth operations.
//!
//! Each base fact is an attribute sentence ("My favorite color is teal"),
//! optionally followed by a revision (consolidate: oracle UPDATE), a
//! contradiction (negate then restate: oracle DELETE + ADD), or a
//! restatement (oracle NOOP). Distractor turns mention the attribute
//! without carrying its value, so distillation has something to filter.
//! Replaying the oracle operations from an empty bank yields a bank from
//! which every generated question is answerable by exact lookup.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, VecDeque};
use std::path::Path;
use std::sync::Mutex;

use super::{DatasetError, Dialogue, DialogueTurn, QAPair, QuestionCategory, Session};
use crate::memory::{MemoryBank, MemoryOperationDecision};
use crate::pipeline::{ExtractedFact, FactExtractor, RuleExtractor};
use crate::policy::{
    compose_update_text, extract_value_field, AnswerOutcome, AnswerPolicy, ManagerDecision,
    ManagerPolicy, PolicyError,
};
use crate::retrieval::RetrievedItem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub n_sessions: usize,
    /// Base attribute facts per dialogue (each yields one question).
    pub n_facts: usize,
    pub revision_rate: f64,
    pub contradiction_rate: f64,
    /// Expected distractor turns per base fact.
    pub distractor_rate: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_sessions: 3,
            n_facts: 12,
            revision_rate: 0.35,
            contradiction_rate: 0.25,
            distractor_rate: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SyntheticEventKind {
    Introduce,
    Revise,
    Contradict,
    Restate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticEvent {
    pub kind: SyntheticEventKind,
    pub turn_id: u32,
    pub subject: String,
    pub attribute: String,
    /// True for attribute chatter that never carries the value.
    pub distractor: bool,
}

/// Ground-truth decision for one extracted fact, keyed by the fact text the
/// rule extractor produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleOp {
    pub fact_text: String,
    pub speaker: String,
    pub decision: MemoryOperationDecision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScript {
    pub events: Vec<SyntheticEvent>,
    /// Flattened decisions in fact order. Replaying them from an empty
    /// bank reproduces the intended final memory state.
    pub oracle_operations: Vec<OracleOp>,
}

impl SyntheticScript {
    /// Applies every oracle decision to a fresh bank.
    pub fn replay(&self) -> MemoryBank {
        let mut bank = MemoryBank::new();
        for op in &self.oracle_operations {
            bank.apply_attributed(&op.decision, Some(&op.speaker), false)
                .expect("oracle decisions apply cleanly");
        }
        bank
    }
}

/// One generated dialogue with its oracle sidecar. Questions live in
/// `dialogue.qa`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub dialogue: Dialogue,
    pub script: SyntheticScript,
}

const NAMES: &[&str] = &[
    "Alice", "Bob", "Carol", "David", "Elena", "Frank", "Grace", "Henry", "Irene", "Jack",
    "Karen", "Leo", "Mona", "Nate", "Olga", "Peter",
];

const ATTRIBUTES: &[(&str, &[&str])] = &[
    ("favorite color", &["crimson", "teal", "amber", "indigo", "sage", "coral"]),
    ("pet", &["a parrot", "a hamster", "a gecko", "a terrier", "a tabby cat"]),
    ("hometown", &["Lisbon", "Oslo", "Quito", "Osaka", "Tbilisi", "Nairobi"]),
    ("favorite food", &["ramen", "paella", "falafel", "gumbo", "pierogi", "laksa"]),
    ("weekend hobby", &["archery", "origami", "kayaking", "pottery", "birdwatching"]),
    ("instrument", &["the cello", "the banjo", "the oboe", "the ukulele"]),
    ("favorite sport", &["fencing", "badminton", "curling", "rowing"]),
    ("job", &["a florist", "an architect", "a paramedic", "a translator", "a beekeeper"]),
    ("favorite drink", &["matcha", "espresso", "kombucha", "chai"]),
    ("car", &["a hatchback", "a pickup", "an old roadster", "a minivan"]),
];

const DISTRACTOR_RELATIONS: &[&str] = &["cousin", "neighbor", "coworker", "roommate", "barber"];
const DISTRACTOR_PLACES: &[&str] = &["market", "gym", "library", "cafe", "station"];

const ACK_LINES: &[&str] = &[
    "That's great to hear!",
    "Nice, thanks for sharing.",
    "Cool, good to know.",
    "Sounds lovely.",
];

struct PendingTurn {
    text: String,
    kind: SyntheticEventKind,
    subject_index: usize,
    attribute: String,
    distractor: bool,
    /// Oracle decisions for the facts this turn will yield, in order.
    oracle: Vec<OracleKind>,
}

#[derive(Clone, Copy)]
enum OracleKind {
    Add,
    Update,
    Delete,
    Noop,
}

fn strip_article(value: &str) -> &str {
    for prefix in ["a ", "an ", "the "] {
        if let Some(rest) = value.strip_prefix(prefix) {
            return rest;
        }
    }
    value
}

/// Generates one dialogue, its oracle script, and its questions,
/// deterministically from the config seed.
pub fn generate_synthetic(config: &SyntheticConfig) -> SyntheticCorpus {
    assert!(
        (0.0..=1.0).contains(&config.revision_rate)
            && (0.0..=1.0).contains(&config.contradiction_rate),
        "rates must lie in [0, 1]"
    );
    assert!(
        config.revision_rate + config.contradiction_rate <= 1.0,
        "revision and contradiction rates must sum to at most 1"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let first = rng.gen_range(0..NAMES.len());
    let second = (first + 1 + rng.gen_range(0..NAMES.len() - 1)) % NAMES.len();
    let speakers = [NAMES[first], NAMES[second]];

    // Unique (subject, attribute) assignment; the pool bounds n_facts.
    let max_facts = 2 * ATTRIBUTES.len();
    let n_facts = config.n_facts.min(max_facts);
    let mut attr_order: Vec<usize> = (0..ATTRIBUTES.len()).collect();
    for i in (1..attr_order.len()).rev() {
        attr_order.swap(i, rng.gen_range(0..=i));
    }

    // Build per-fact event queues, then interleave them.
    struct FactPlan {
        subject_index: usize,
        attribute: &'static str,
        queue: VecDeque<PendingTurn>,
        final_value: String,
        kind_tail: Option<SyntheticEventKind>,
        distractor_count: usize,
        value_turns: Vec<usize>, // filled during interleave
    }

    let mut plans: Vec<FactPlan> = Vec::with_capacity(n_facts);
    for fact_index in 0..n_facts {
        let subject_index = fact_index % 2;
        // Attributes stay unique per dialogue while the pool lasts; past
        // that, the two speakers share attribute types.
        let attr_index = if n_facts <= ATTRIBUTES.len() {
            attr_order[fact_index]
        } else {
            attr_order[(fact_index / 2) % ATTRIBUTES.len()]
        };
        let (attribute, values) = ATTRIBUTES[attr_index];
        let v0 = values[rng.gen_range(0..values.len())].to_string();
        let v1 = loop {
            let candidate = values[rng.gen_range(0..values.len())].to_string();
            if candidate != v0 {
                break candidate;
            }
        };

        let roll: f64 = rng.gen();
        let tail = if roll < config.contradiction_rate {
            Some(SyntheticEventKind::Contradict)
        } else if roll < config.contradiction_rate + config.revision_rate {
            Some(SyntheticEventKind::Revise)
        } else if rng.gen_bool(0.35) {
            Some(SyntheticEventKind::Restate)
        } else {
            None
        };

        let mut queue = VecDeque::new();
        // Binomial distractor count, each falling before or after the
        // introduction. Placement variety matters: states where a fact
        // arrives with no same-attribute neighbor (and states where a
        // careless merge would corrupt a value entry) must both occur.
        let half_rate = (config.distractor_rate / 2.0).clamp(0.0, 1.0);
        let n_distractors =
            usize::from(rng.gen_bool(half_rate)) + usize::from(rng.gen_bool(half_rate));
        let mut post_intro_distractors = Vec::new();
        for d in 0..n_distractors {
            let text = match d % 3 {
                0 => format!(
                    "I chatted with my {} about my {attribute} yesterday.",
                    DISTRACTOR_RELATIONS[rng.gen_range(0..DISTRACTOR_RELATIONS.len())]
                ),
                1 => format!(
                    "Someone at the {} asked about my {attribute}.",
                    DISTRACTOR_PLACES[rng.gen_range(0..DISTRACTOR_PLACES.len())]
                ),
                _ => format!("I've been thinking about my {attribute} a lot."),
            };
            let pending = PendingTurn {
                text,
                kind: SyntheticEventKind::Introduce,
                subject_index,
                attribute: attribute.to_string(),
                distractor: true,
                oracle: vec![OracleKind::Add],
            };
            if rng.gen_bool(0.5) {
                queue.push_back(pending);
            } else {
                post_intro_distractors.push(pending);
            }
        }
        queue.push_back(PendingTurn {
            text: format!("My {attribute} is {v0}."),
            kind: SyntheticEventKind::Introduce,
            subject_index,
            attribute: attribute.to_string(),
            distractor: false,
            oracle: vec![OracleKind::Add],
        });
        for pending in post_intro_distractors {
            queue.push_back(pending);
        }
        let final_value = match tail {
            Some(SyntheticEventKind::Revise) => {
                queue.push_back(PendingTurn {
                    text: format!("My {attribute} is {v1}."),
                    kind: SyntheticEventKind::Revise,
                    subject_index,
                    attribute: attribute.to_string(),
                    distractor: false,
                    oracle: vec![OracleKind::Update],
                });
                v1.clone()
            }
            Some(SyntheticEventKind::Contradict) => {
                queue.push_back(PendingTurn {
                    text: format!(
                        "My {attribute} is not {} anymore. Nowadays my {attribute} is {v1}.",
                        strip_article(&v0)
                    ),
                    kind: SyntheticEventKind::Contradict,
                    subject_index,
                    attribute: attribute.to_string(),
                    distractor: false,
                    oracle: vec![OracleKind::Delete, OracleKind::Add],
                });
                v1.clone()
            }
            Some(SyntheticEventKind::Restate) => {
                queue.push_back(PendingTurn {
                    text: format!("Like I said before, my {attribute} is {v0}."),
                    kind: SyntheticEventKind::Restate,
                    subject_index,
                    attribute: attribute.to_string(),
                    distractor: false,
                    oracle: vec![OracleKind::Noop],
                });
                v0.clone()
            }
            _ => v0.clone(),
        };
        plans.push(FactPlan {
            subject_index,
            attribute,
            queue,
            final_value,
            kind_tail: tail,
            distractor_count: n_distractors,
            value_turns: Vec::new(),
        });
    }

    // Interleave: repeatedly pop from a random non-empty fact queue,
    // preserving per-fact ordering.
    let mut pending: Vec<PendingTurn> = Vec::new();
    let mut owners: Vec<usize> = Vec::new();
    loop {
        let live: Vec<usize> =
            (0..plans.len()).filter(|i| !plans[*i].queue.is_empty()).collect();
        if live.is_empty() {
            break;
        }
        let pick = live[rng.gen_range(0..live.len())];
        pending.push(plans[pick].queue.pop_front().expect("non-empty"));
        owners.push(pick);
    }

    // Materialize turns (with occasional acknowledgement filler), sessions,
    // events, oracle decisions, and the shadow bank that supplies targets.
    let extractor = RuleExtractor;
    let total = pending.len().max(1);
    let per_session = total.div_ceil(config.n_sessions.max(1));
    let mut sessions: Vec<Session> = Vec::new();
    let mut events = Vec::new();
    let mut oracle_operations = Vec::new();
    let mut shadow = MemoryBank::new();
    let mut attr_entries: HashMap<(usize, String), crate::memory::MemoryId> = HashMap::new();
    let mut turn_id: u32 = 0;

    for (index, (turn_plan, owner)) in pending.into_iter().zip(owners).enumerate() {
        let session_index = index / per_session;
        if sessions.len() <= session_index {
            sessions.push(Session {
                session_id: format!("session_{}", session_index + 1),
                datetime: format!(
                    "{}:{:02} pm on {} May, 2023",
                    1 + session_index % 8,
                    (7 * session_index + 13) % 60,
                    5 + session_index
                ),
                turns: Vec::new(),
            });
        }
        let session = sessions.last_mut().expect("session exists");
        let speaker = speakers[turn_plan.subject_index];
        let turn = DialogueTurn {
            turn_id,
            speaker: speaker.to_string(),
            text: turn_plan.text.clone(),
            timestamp: session.datetime.clone(),
            session_id: session.session_id.clone(),
        };
        events.push(SyntheticEvent {
            kind: turn_plan.kind,
            turn_id,
            subject: speaker.to_string(),
            attribute: turn_plan.attribute.clone(),
            distractor: turn_plan.distractor,
        });
        if !turn_plan.distractor {
            plans[owner].value_turns.push(turn_id as usize);
        }

        // Derive the oracle decision per extracted fact via the same rule
        // extractor the pipeline uses, so keys match exactly.
        let facts = extractor.extract(&turn).expect("rule extractor is infallible");
        assert_eq!(
            facts.len(),
            turn_plan.oracle.len(),
            "event template must yield one fact per oracle op: {:?}",
            turn.text
        );
        for (fact, oracle_kind) in facts.iter().zip(&turn_plan.oracle) {
            let key = (turn_plan.subject_index, turn_plan.attribute.clone());
            let decision = match oracle_kind {
                OracleKind::Add => {
                    let d = MemoryOperationDecision::add(fact.text.clone());
                    let outcome = shadow
                        .apply_attributed(&d, Some(speaker), true)
                        .expect("oracle add applies");
                    if !turn_plan.distractor {
                        attr_entries.insert(key, outcome.affected_id.expect("add yields id"));
                    }
                    d
                }
                OracleKind::Update => {
                    let target = attr_entries[&key];
                    let old_text = shadow.get(target).expect("target live").text.clone();
                    let d = MemoryOperationDecision::update(
                        target,
                        compose_update_text(&old_text, &fact.text),
                    )
                    .with_old_text(old_text);
                    shadow.apply_attributed(&d, Some(speaker), true).expect("oracle update");
                    d
                }
                OracleKind::Delete => {
                    let target = attr_entries.remove(&key).expect("delete target known");
                    let old_text = shadow.get(target).expect("target live").text.clone();
                    let d = MemoryOperationDecision::delete(target).with_old_text(old_text);
                    shadow.apply_attributed(&d, Some(speaker), true).expect("oracle delete");
                    d
                }
                OracleKind::Noop => {
                    let d = MemoryOperationDecision::noop();
                    shadow.apply_attributed(&d, Some(speaker), true).expect("noop applies");
                    d
                }
            };
            oracle_operations.push(OracleOp {
                fact_text: fact.text.clone(),
                speaker: speaker.to_string(),
                decision,
            });
        }

        session.turns.push(turn);
        turn_id += 1;

        // Occasional acknowledgement from the other speaker; carries no
        // facts by the extractor's rules.
        if rng.gen_bool(0.25) {
            let other = speakers[1 - turn_plan.subject_index];
            session.turns.push(DialogueTurn {
                turn_id,
                speaker: other.to_string(),
                text: ACK_LINES[rng.gen_range(0..ACK_LINES.len())].to_string(),
                timestamp: session.datetime.clone(),
                session_id: session.session_id.clone(),
            });
            turn_id += 1;
        }
    }

    let qa: Vec<QAPair> = plans
        .iter()
        .map(|plan| {
            let category = match plan.kind_tail {
                Some(SyntheticEventKind::Contradict) => QuestionCategory::Temporal,
                Some(SyntheticEventKind::Revise) => QuestionCategory::MultiHop,
                Some(_) => QuestionCategory::SingleHop,
                None if plan.distractor_count > 0 => QuestionCategory::OpenDomain,
                None => QuestionCategory::SingleHop,
            };
            QAPair {
                question: format!(
                    "What is {}'s {}?",
                    speakers[plan.subject_index], plan.attribute
                ),
                gold_answer: plan.final_value.clone(),
                category,
                evidence_turn_ids: Some(plan.value_turns.iter().map(|t| *t as u32).collect()),
            }
        })
        .collect();

    SyntheticCorpus {
        dialogue: Dialogue {
            dialogue_id: format!("synthetic-{}", config.seed),
            sessions,
            qa,
        },
        script: SyntheticScript { events, oracle_operations },
    }
}

/// Exact lookup over a bank built from oracle operations: parses
/// "What is X's Y?" and reads the value slot of the matching entry.
pub fn oracle_lookup_answer(bank: &MemoryBank, question: &str) -> Option<String> {
    let (subject, attribute) = parse_attribute_question(question)?;
    let pattern = format!("{subject}'s {attribute} is");
    bank.iter()
        .filter(|e| e.text.contains(&pattern))
        .max_by_key(|e| (e.updated_at, e.id))
        .and_then(|e| extract_value_field(&e.text))
}

fn parse_attribute_question(question: &str) -> Option<(String, String)> {
    let rest = question.trim().strip_prefix("What is ")?.trim_end_matches('?');
    let (subject, attribute) = rest.split_once("'s ")?;
    Some((subject.trim().to_string(), attribute.trim().to_string()))
}

/// Manager policy that plays the scripted ground-truth operation for each
/// fact. Used for ceilings and diagnostics, never for training.
pub struct OracleManagerPolicy {
    by_fact: Mutex<HashMap<String, VecDeque<MemoryOperationDecision>>>,
}

impl OracleManagerPolicy {
    pub fn new(script: &SyntheticScript) -> Self {
        let mut by_fact: HashMap<String, VecDeque<MemoryOperationDecision>> = HashMap::new();
        for op in &script.oracle_operations {
            by_fact.entry(op.fact_text.clone()).or_default().push_back(op.decision.clone());
        }
        Self { by_fact: Mutex::new(by_fact) }
    }
}

impl ManagerPolicy for OracleManagerPolicy {
    fn decide(
        &self,
        fact: &ExtractedFact,
        _retrieved: &[RetrievedItem],
        temperature: f64,
        _rng: &mut dyn RngCore,
    ) -> Result<ManagerDecision, PolicyError> {
        let mut by_fact = self.by_fact.lock().expect("oracle map lock");
        let decision = by_fact
            .get_mut(&fact.text)
            .and_then(|queue| queue.pop_front())
            .unwrap_or_else(|| {
                log::warn!("no oracle operation scripted for fact {:?}", fact.text);
                MemoryOperationDecision::noop()
            });
        Ok(ManagerDecision { decisions: vec![decision], log_prob: None, temperature })
    }
}

/// Answer policy that performs exact lookup over the retrieved context.
pub struct OracleAnswerPolicy;

impl AnswerPolicy for OracleAnswerPolicy {
    fn answer(
        &self,
        question: &str,
        retrieved: &[RetrievedItem],
        temperature: f64,
        _rng: &mut dyn RngCore,
    ) -> Result<AnswerOutcome, PolicyError> {
        let chosen = parse_attribute_question(question).and_then(|(subject, attribute)| {
            let pattern = format!("{subject}'s {attribute} is");
            retrieved
                .iter()
                .filter(|m| m.text.contains(&pattern))
                .max_by_key(|m| (m.updated_at, m.id))
        });
        Ok(match chosen {
            Some(memory) => AnswerOutcome {
                answer: extract_value_field(&memory.text)
                    .unwrap_or_else(|| memory.text.clone()),
                distilled_ids: vec![memory.id],
                log_prob: None,
                temperature,
            },
            None => AnswerOutcome {
                answer: crate::policy::UNKNOWN_ANSWER.to_string(),
                distilled_ids: Vec::new(),
                log_prob: None,
                temperature,
            },
        })
    }
}

/// Builds per-turn manager training tuples from a synthetic corpus: for
/// each fact-bearing turn, the oracle bank of all preceding turns, the
/// turn itself, and the full set of attribute questions answerable right
/// after it. This mirrors the construction of manager training data — a
/// prebuilt temporal bank fused with the current turn and its QA — with
/// per-decision credit assignment. Scoring every live attribute (not just
/// the one this turn touches) makes collateral damage visible: an edit
/// that corrupts an unrelated entry loses that entry's question.
pub fn synthetic_manager_tuples(corpus: &SyntheticCorpus) -> Vec<super::ManagerTuple> {
    let extractor = RuleExtractor;
    let mut bank = MemoryBank::new();
    let mut op_index = 0usize;
    let ops = &corpus.script.oracle_operations;
    let mut attribute_keys: Vec<(String, String)> = Vec::new();
    let mut tuples = Vec::new();

    for turn in corpus.dialogue.turns() {
        let facts = extractor.extract(turn).expect("rule extractor is infallible");
        if facts.is_empty() {
            continue; // acknowledgement filler
        }
        let event = corpus
            .script
            .events
            .iter()
            .find(|e| e.turn_id == turn.turn_id)
            .expect("fact-bearing turns have events");
        let key = (event.subject.clone(), event.attribute.clone());
        if !attribute_keys.contains(&key) {
            attribute_keys.push(key);
        }

        let temporal_bank = bank.clone();
        for fact in &facts {
            let op = &ops[op_index];
            debug_assert_eq!(op.fact_text, fact.text);
            bank.apply_attributed(&op.decision, Some(&op.speaker), false)
                .expect("oracle ops replay");
            op_index += 1;
        }

        let qa: Vec<QAPair> = attribute_keys
            .iter()
            .filter_map(|(subject, attribute)| {
                let question = format!("What is {subject}'s {attribute}?");
                oracle_lookup_answer(&bank, &question).map(|gold| {
                    let current = subject == &event.subject && attribute == &event.attribute;
                    let category = match event.kind {
                        SyntheticEventKind::Contradict if current => QuestionCategory::Temporal,
                        SyntheticEventKind::Revise if current => QuestionCategory::MultiHop,
                        _ if current && event.distractor => QuestionCategory::OpenDomain,
                        _ => QuestionCategory::SingleHop,
                    };
                    QAPair {
                        question,
                        gold_answer: gold,
                        category,
                        evidence_turn_ids: Some(vec![turn.turn_id]),
                    }
                })
            })
            .collect();
        if qa.is_empty() {
            continue;
        }
        tuples.push(super::ManagerTuple { temporal_bank, current_turn: turn.clone(), qa });
    }
    tuples
}

pub fn save_oracle_sidecar(
    script: &SyntheticScript,
    path: impl AsRef<Path>,
) -> Result<(), DatasetError> {
    let mut text = serde_json::to_string_pretty(script).map_err(|e| DatasetError::FormatError {
        path: path.as_ref().display().to_string(),
        offset: 0,
        message: e.to_string(),
    })?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_oracle_sidecar(path: impl AsRef<Path>) -> Result<SyntheticScript, DatasetError> {
    let text = std::fs::read_to_string(&path)?;
    serde_json::from_str(&text).map_err(|e| DatasetError::FormatError {
        path: path.as_ref().display().to_string(),
        offset: 0,
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::em_reward;

    #[test]
    fn generation_is_deterministic_under_seed() {
        let config = SyntheticConfig { seed: 7, ..SyntheticConfig::default() };
        let a = generate_synthetic(&config);
        let b = generate_synthetic(&config);
        assert_eq!(a, b);
        let c = generate_synthetic(&SyntheticConfig { seed: 8, ..config });
        assert_ne!(a, c);
    }

    #[test]
    fn zero_rates_yield_only_add_and_noop() {
        let config = SyntheticConfig {
            seed: 3,
            revision_rate: 0.0,
            contradiction_rate: 0.0,
            ..SyntheticConfig::default()
        };
        let corpus = generate_synthetic(&config);
        for op in &corpus.script.oracle_operations {
            assert!(
                matches!(
                    op.decision.kind,
                    crate::memory::DecisionKind::Add | crate::memory::DecisionKind::Noop
                ),
                "unexpected {:?}",
                op.decision.kind
            );
        }
    }

    #[test]
    fn oracle_operations_answer_every_question_exactly() {
        for seed in 0..8 {
            let config = SyntheticConfig { seed, ..SyntheticConfig::default() };
            let corpus = generate_synthetic(&config);
            let bank = corpus.script.replay();
            for qa in &corpus.dialogue.qa {
                let answer = oracle_lookup_answer(&bank, &qa.question)
                    .unwrap_or_else(|| panic!("no answer for {:?}", qa.question));
                assert_eq!(
                    em_reward(&answer, &qa.gold_answer),
                    1.0,
                    "seed {seed}: {:?} answered {answer:?}, gold {:?}",
                    qa.question,
                    qa.gold_answer
                );
            }
        }
    }

    #[test]
    fn all_four_categories_appear_across_seeds() {
        let mut seen = std::collections::HashSet::new();
        for seed in 0..6 {
            let corpus =
                generate_synthetic(&SyntheticConfig { seed, ..SyntheticConfig::default() });
            for qa in &corpus.dialogue.qa {
                seen.insert(qa.category);
            }
        }
        assert_eq!(seen.len(), 4, "{seen:?}");
    }

    #[test]
    fn sidecar_round_trips() {
        let corpus = generate_synthetic(&SyntheticConfig::default());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("oracle.json");
        save_oracle_sidecar(&corpus.script, &path).unwrap();
        let loaded = load_oracle_sidecar(&path).unwrap();
        assert_eq!(loaded, corpus.script);
    }

    #[test]
    fn turn_ids_are_strictly_increasing() {
        let corpus = generate_synthetic(&SyntheticConfig { seed: 11, ..Default::default() });
        let ids: Vec<u32> = corpus.dialogue.turns().map(|t| t.turn_id).collect();
        assert!(ids.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(corpus.dialogue.sessions.len(), 3);
    }
}
