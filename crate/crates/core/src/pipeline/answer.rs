//! Memory-augmented answering: retrieve, distill, extract.

use rand::RngCore;

use super::PipelineError;
use crate::memory::MemoryBank;
use crate::policy::{AnswerOutcome, AnswerPolicy};
use crate::retrieval::{RetrievedItem, Retriever};

/// Retrieves up to `k` candidate memories for `question` and runs the
/// answer policy over them. When entries carry speaker attribution the
/// budget is split evenly across participants (first-appearance order), so
/// one verbose speaker cannot crowd out the other.
pub fn answer_question(
    question: &str,
    bank: &MemoryBank,
    policy: &dyn AnswerPolicy,
    k: usize,
    temperature: f64,
    rng: &mut dyn RngCore,
) -> Result<AnswerOutcome, PipelineError> {
    let retrieved = retrieve_for_question(question, bank, k);
    Ok(policy.answer(question, &retrieved, temperature, rng)?)
}

/// The retrieval step of answering, exposed for tuple construction and
/// ablations.
pub(crate) fn retrieve_for_question(
    question: &str,
    bank: &MemoryBank,
    k: usize,
) -> Vec<RetrievedItem> {
    let mut retriever = Retriever::default();
    let speakers: Vec<String> = bank.speakers().iter().map(|s| s.to_string()).collect();
    if speakers.len() >= 2 {
        let per_participant = (k / speakers.len()).max(1);
        let mut out = Vec::new();
        for speaker in &speakers {
            let ranked = retriever.retrieve_top_k_filtered(question, bank, per_participant, |e| {
                e.speaker.as_deref() == Some(speaker.as_str())
            });
            out.extend(ranked.materialize(bank));
        }
        out
    } else {
        retriever.retrieve_top_k(question, bank, k).materialize(bank)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::MemoryOperationDecision;
    use crate::policy::{AnswerPolicyParameters, AnswerRule};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_bank_answers_unknown() {
        let bank = MemoryBank::new();
        let policy = AnswerPolicyParameters::baseline(AnswerRule::ValueField);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let outcome =
            answer_question("What is Alice's pet?", &bank, &policy, 60, 0.0, &mut rng).unwrap();
        assert_eq!(outcome.answer, "unknown");
    }

    #[test]
    fn participant_budget_splits_evenly() {
        let mut bank = MemoryBank::new();
        for i in 0..5 {
            bank.apply_attributed(
                &MemoryOperationDecision::add(format!("Alice fact number {i} about sailing")),
                Some("Alice"),
                true,
            )
            .unwrap();
        }
        for i in 0..5 {
            bank.apply_attributed(
                &MemoryOperationDecision::add(format!("Bob fact number {i} about sailing")),
                Some("Bob"),
                true,
            )
            .unwrap();
        }
        let retrieved = retrieve_for_question("Who talked about sailing?", &bank, 6);
        let alice = retrieved.iter().filter(|m| m.speaker.as_deref() == Some("Alice")).count();
        let bob = retrieved.iter().filter(|m| m.speaker.as_deref() == Some("Bob")).count();
        assert_eq!((alice, bob), (3, 3));
    }

    #[test]
    fn single_entry_bank_with_gold_fact_answers_correctly() {
        let mut bank = MemoryBank::new();
        bank.apply(&MemoryOperationDecision::add("Alice's favorite color is teal"), true).unwrap();
        let policy = AnswerPolicyParameters::baseline(AnswerRule::ValueField);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let outcome =
            answer_question("What is Alice's favorite color?", &bank, &policy, 1, 0.0, &mut rng)
                .unwrap();
        assert_eq!(outcome.answer, "teal");
        assert_eq!(outcome.distilled_ids.len(), 1);
    }
}
