//! Training-tuple construction: temporal banks for the manager, retrieved
//! contexts for the answer agent.

use super::{DatasetError, Dialogue, DialogueTurn, QAPair, QuestionCategory};
use crate::memory::{MemoryBank, MemoryOperationDecision};
use crate::pipeline::{FactExtractor, PipelineError};
use crate::policy::compose_update_text;
use crate::retrieval::{tokenize, RetrievedItem, Retriever};

/// Bootstrap threshold: a fact whose token overlap with its best match is
/// at least this consolidates instead of adding.
const BOOTSTRAP_UPDATE_OVERLAP: f64 = 0.6;

/// One manager training state: a temporal bank built strictly from turns
/// preceding `current_turn`, plus the questions whose evidence cites it.
#[derive(Debug, Clone)]
pub struct ManagerTuple {
    pub temporal_bank: MemoryBank,
    pub current_turn: DialogueTurn,
    pub qa: Vec<QAPair>,
}

/// One answer training state: a question with its retrieved context
/// (top `k` per participant) and gold answer.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct AnswerTuple {
    pub question: String,
    pub retrieved: Vec<RetrievedItem>,
    pub gold_answer: String,
    pub category: QuestionCategory,
}

fn overlap_ratio(fact_text: &str, memory_text: &str) -> f64 {
    let fact: std::collections::HashSet<String> = tokenize(fact_text).into_iter().collect();
    if fact.is_empty() {
        return 0.0;
    }
    let memory: std::collections::HashSet<String> = tokenize(memory_text).into_iter().collect();
    fact.intersection(&memory).count() as f64 / fact.len() as f64
}

fn pipeline_to_dataset(e: PipelineError) -> DatasetError {
    DatasetError::ExtractorUnavailable(e.to_string())
}

/// Builds one tuple per turn. The temporal bank for turn `t` derives only
/// from turns `[t − window, t)`, bootstrapped with a deterministic
/// ADD-on-new / UPDATE-on-match rule so construction needs no policy.
pub fn build_manager_tuples(
    dialogue: &Dialogue,
    extractor: &dyn FactExtractor,
    window: usize,
) -> Result<Vec<ManagerTuple>, DatasetError> {
    let turns: Vec<&DialogueTurn> = dialogue.turns().collect();
    let mut tuples = Vec::with_capacity(turns.len());
    for (t_index, turn) in turns.iter().enumerate() {
        let lo = t_index.saturating_sub(window);
        let mut bank = MemoryBank::new();
        let mut retriever = Retriever::default();
        for preceding in &turns[lo..t_index] {
            for fact in extractor.extract(preceding).map_err(pipeline_to_dataset)? {
                let retrieved = retriever.retrieve_top_k(&fact.text, &bank, 1).materialize(&bank);
                let decision = match retrieved.first() {
                    Some(best)
                        if overlap_ratio(&fact.text, &best.text) >= BOOTSTRAP_UPDATE_OVERLAP =>
                    {
                        MemoryOperationDecision::update(
                            best.id,
                            compose_update_text(&best.text, &fact.text),
                        )
                    }
                    _ => MemoryOperationDecision::add(fact.text.clone()),
                };
                bank.apply_attributed(&decision, Some(&fact.speaker), false)
                    .map_err(|e| DatasetError::ExtractorUnavailable(e.to_string()))?;
            }
        }
        let qa: Vec<QAPair> = dialogue
            .qa
            .iter()
            .filter(|q| {
                q.evidence_turn_ids
                    .as_ref()
                    .map(|ids| ids.contains(&turn.turn_id))
                    .unwrap_or(false)
            })
            .cloned()
            .collect();
        tuples.push(ManagerTuple {
            temporal_bank: bank,
            current_turn: (*turn).clone(),
            qa,
        });
    }
    Ok(tuples)
}

/// Per question: retrieve the top `k_per_participant` entries for each
/// participant (first-speaker first) and concatenate.
pub fn build_answer_tuples(
    dialogue: &Dialogue,
    bank: &MemoryBank,
    k_per_participant: usize,
) -> Vec<AnswerTuple> {
    let participants = dialogue.participants();
    let mut retriever = Retriever::default();
    dialogue
        .qa
        .iter()
        .map(|qa| {
            let mut retrieved = Vec::new();
            for participant in &participants {
                let ranked = retriever.retrieve_top_k_filtered(
                    &qa.question,
                    bank,
                    k_per_participant,
                    |e| e.speaker.as_deref() == Some(*participant),
                );
                retrieved.extend(ranked.materialize(bank));
            }
            AnswerTuple {
                question: qa.question.clone(),
                retrieved,
                gold_answer: qa.gold_answer.clone(),
                category: qa.category,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Session;
    use crate::pipeline::RuleExtractor;

    fn dialogue_with_turns(texts: &[(&str, &str)], qa: Vec<QAPair>) -> Dialogue {
        Dialogue {
            dialogue_id: "d".into(),
            sessions: vec![Session {
                session_id: "s1".into(),
                datetime: "t".into(),
                turns: texts
                    .iter()
                    .enumerate()
                    .map(|(i, (speaker, text))| DialogueTurn {
                        turn_id: i as u32,
                        speaker: speaker.to_string(),
                        text: text.to_string(),
                        timestamp: "t".into(),
                        session_id: "s1".into(),
                    })
                    .collect(),
            }],
            qa,
        }
    }

    #[test]
    fn first_turn_has_empty_temporal_bank() {
        let d = dialogue_with_turns(
            &[("Alice", "My pet is a gecko."), ("Bob", "My hometown is Oslo.")],
            vec![],
        );
        let tuples = build_manager_tuples(&d, &RuleExtractor, 50).unwrap();
        assert_eq!(tuples.len(), 2);
        assert!(tuples[0].temporal_bank.is_empty());
        assert_eq!(tuples[1].temporal_bank.len(), 1);
    }

    #[test]
    fn window_bounds_are_respected() {
        // Turn texts carry their own index so bank provenance is checkable.
        let texts: Vec<(String, String)> = (0..8)
            .map(|i| ("Alice".to_string(), format!("My fact number f{i} is value v{i}.")))
            .collect();
        let refs: Vec<(&str, &str)> =
            texts.iter().map(|(s, t)| (s.as_str(), t.as_str())).collect();
        let d = dialogue_with_turns(&refs, vec![]);
        let window = 3;
        let tuples = build_manager_tuples(&d, &RuleExtractor, window).unwrap();
        for (t, tuple) in tuples.iter().enumerate() {
            let lo = t.saturating_sub(window);
            for entry in tuple.temporal_bank.iter() {
                // Consolidated entries carry several source markers.
                let sources: Vec<usize> = entry
                    .text
                    .split_whitespace()
                    .filter_map(|tok| tok.strip_prefix('f'))
                    .filter_map(|digits| digits.parse().ok())
                    .collect();
                assert!(!sources.is_empty(), "no provenance in {:?}", entry.text);
                for source in sources {
                    assert!(source >= lo && source < t, "turn {t} leaked fact {source}");
                }
            }
        }
    }

    #[test]
    fn qa_pairs_attach_to_evidence_turns() {
        let qa = vec![QAPair {
            question: "What is Alice's pet?".into(),
            gold_answer: "a gecko".into(),
            category: QuestionCategory::SingleHop,
            evidence_turn_ids: Some(vec![1]),
        }];
        let d = dialogue_with_turns(
            &[("Alice", "My hometown is Oslo."), ("Alice", "My pet is a gecko.")],
            qa,
        );
        let tuples = build_manager_tuples(&d, &RuleExtractor, 50).unwrap();
        assert!(tuples[0].qa.is_empty());
        assert_eq!(tuples[1].qa.len(), 1);
    }

    #[test]
    fn answer_tuples_split_budget_per_participant() {
        let d = dialogue_with_turns(
            &[("Alice", "My pet is a gecko."), ("Bob", "My pet is a terrier.")],
            vec![QAPair {
                question: "What is Alice's pet?".into(),
                gold_answer: "a gecko".into(),
                category: QuestionCategory::SingleHop,
                evidence_turn_ids: None,
            }],
        );
        let mut bank = MemoryBank::new();
        for i in 0..40 {
            let speaker = if i % 2 == 0 { "Alice" } else { "Bob" };
            bank.apply_attributed(
                &MemoryOperationDecision::add(format!("{speaker} mentioned topic {i}")),
                Some(speaker),
                true,
            )
            .unwrap();
        }
        let tuples = build_answer_tuples(&d, &bank, 30);
        assert_eq!(tuples.len(), 1);
        // 20 per speaker available, 30 requested: take-all per side.
        assert_eq!(tuples[0].retrieved.len(), 40);

        let capped = build_answer_tuples(&d, &bank, 15);
        assert_eq!(capped[0].retrieved.len(), 30);
        let alice = capped[0]
            .retrieved
            .iter()
            .filter(|m| m.speaker.as_deref() == Some("Alice"))
            .count();
        assert_eq!(alice, 15);
    }
}
