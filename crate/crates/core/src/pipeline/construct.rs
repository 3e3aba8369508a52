//! Memory-bank construction: per turn, extract facts, retrieve context,
//! ask the manager policy, and apply its decisions.

use rand::RngCore;

use super::extract::FactExtractor;
use super::PipelineError;
use crate::dataset::Dialogue;
use crate::memory::{LogRecord, MemoryBank, OperationOutcome};
use crate::pipeline::ExtractedFact;
use crate::policy::ManagerPolicy;
use crate::retrieval::{RetrievedItem, Retriever, DEFAULT_MANAGER_K};

/// One manager step: the fact it saw, what was retrieved, what it decided,
/// and what the bank actually did.
#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub fact: ExtractedFact,
    pub retrieved: Vec<RetrievedItem>,
    pub log: LogRecord,
    pub outcome: OperationOutcome,
}

pub type ConstructionTrace = Vec<TraceRecord>;

/// Runs the manager over a dialogue, returning the final bank and the full
/// operation trace. Invalid decisions demote to NOOP (logged in the trace),
/// never abort: RL rollouts must finish their episodes.
pub fn construct_memory_bank(
    dialogue: &Dialogue,
    manager: &dyn ManagerPolicy,
    extractor: &dyn FactExtractor,
    temperature: f64,
    manager_k: usize,
    rng: &mut dyn RngCore,
) -> Result<(MemoryBank, ConstructionTrace), PipelineError> {
    let mut bank = MemoryBank::new();
    let mut retriever = Retriever::default();
    let mut trace = Vec::new();
    let k = if manager_k == 0 { DEFAULT_MANAGER_K } else { manager_k };

    for turn in dialogue.turns() {
        for fact in extractor.extract(turn)? {
            let retrieved = retriever.retrieve_top_k(&fact.text, &bank, k).materialize(&bank);
            let decision = manager.decide(&fact, &retrieved, temperature, rng)?;
            for op in decision.decisions {
                let record = LogRecord::from_decision(bank.event_clock(), &op, Some(&fact.speaker));
                let outcome = bank.apply_attributed(&op, Some(&fact.speaker), false)?;
                trace.push(TraceRecord {
                    fact: fact.clone(),
                    retrieved: retrieved.clone(),
                    log: record,
                    outcome,
                });
            }
        }
    }
    Ok((bank, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{DialogueTurn, Session};
    use crate::memory::DecisionKind;
    use crate::policy::OperationPolicyParameters;
    use crate::pipeline::RuleExtractor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dialogue(turn_texts: &[(&str, &str)]) -> Dialogue {
        Dialogue {
            dialogue_id: "d0".into(),
            sessions: vec![Session {
                session_id: "s1".into(),
                datetime: "2:00 pm on 1 May, 2023".into(),
                turns: turn_texts
                    .iter()
                    .enumerate()
                    .map(|(i, (speaker, text))| DialogueTurn {
                        turn_id: i as u32,
                        speaker: speaker.to_string(),
                        text: text.to_string(),
                        timestamp: "2:00 pm on 1 May, 2023".into(),
                        session_id: "s1".into(),
                    })
                    .collect(),
            }],
            qa: vec![],
        }
    }

    #[test]
    fn empty_dialogue_builds_empty_bank() {
        let d = dialogue(&[]);
        let policy = OperationPolicyParameters::zeros();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (bank, trace) =
            construct_memory_bank(&d, &policy, &RuleExtractor, 0.0, 10, &mut rng).unwrap();
        assert!(bank.is_empty());
        assert!(trace.is_empty());
    }

    #[test]
    fn all_noop_policy_keeps_bank_empty() {
        let d = dialogue(&[("Alice", "My favorite color is teal."), ("Bob", "My pet is a gecko.")]);
        // Huge NOOP bias.
        let policy = OperationPolicyParameters::from_rows([
            [0.0; 6],
            [0.0; 6],
            [0.0; 6],
            [0.0, 0.0, 0.0, 0.0, 0.0, 100.0],
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (bank, trace) =
            construct_memory_bank(&d, &policy, &RuleExtractor, 0.0, 10, &mut rng).unwrap();
        assert!(bank.is_empty());
        assert_eq!(trace.len(), 2);
        assert!(trace.iter().all(|t| t.log.kind == DecisionKind::Noop));
    }

    #[test]
    fn trace_records_outcomes_in_order() {
        let d = dialogue(&[("Alice", "My favorite color is teal."), ("Alice", "Actually, my favorite color is sage.")]);
        // Strong ADD-on-empty, UPDATE-on-overlap behavior.
        let mut policy = OperationPolicyParameters::zeros();
        policy.set_weight(DecisionKind::Add, 4, 8.0);
        policy.set_weight(DecisionKind::Update, 2, 12.0);
        policy.set_weight(DecisionKind::Add, 5, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (bank, trace) =
            construct_memory_bank(&d, &policy, &RuleExtractor, 0.0, 10, &mut rng).unwrap();
        assert_eq!(trace.len(), 2);
        assert_eq!(trace[0].log.kind, DecisionKind::Add);
        assert_eq!(trace[1].log.kind, DecisionKind::Update);
        assert_eq!(bank.len(), 1);
        let entry = bank.iter().next().unwrap();
        assert!(entry.text.contains("teal") && entry.text.contains("sage"));
        assert_eq!(entry.speaker.as_deref(), Some("Alice"));
    }
}
