//! Hand-designed features behind the desk-scale parametric policies.

use std::collections::HashSet;

use crate::pipeline::ExtractedFact;
use crate::retrieval::{tokenize, RetrievedItem};

/// Feature order for the operation policy. `weights` rows index operations,
/// columns index these features.
pub const OP_FEATURE_NAMES: [&str; 6] =
    ["max_sim", "mean_sim", "best_overlap", "negation", "bank_empty", "bias"];

pub const OP_FEATURE_COUNT: usize = OP_FEATURE_NAMES.len();

/// Per-memory feature order for the answer policy's distillation scores.
pub const ANSWER_FEATURE_NAMES: [&str; 4] = ["similarity", "question_overlap", "recency", "bias"];

pub const ANSWER_FEATURE_COUNT: usize = ANSWER_FEATURE_NAMES.len();

const NEGATION_TOKENS: &[&str] =
    &["not", "no", "never", "anymore", "stopped", "quit", "dislikes", "hates", "longer"];

fn token_set(text: &str) -> HashSet<String> {
    tokenize(text).into_iter().collect()
}

/// Fraction of `of` tokens present in `within`.
fn overlap_ratio(of: &HashSet<String>, within: &HashSet<String>) -> f64 {
    if of.is_empty() {
        return 0.0;
    }
    of.intersection(within).count() as f64 / of.len() as f64
}

fn has_negation_marker(text: &str) -> bool {
    let lowered = text.to_lowercase();
    if lowered.contains("n't") {
        return true;
    }
    token_set(&lowered).iter().any(|t| NEGATION_TOKENS.contains(&t.as_str()))
}

/// Features of one (fact, retrieval snapshot) manager state. `retrieved`
/// must be score-descending, as produced by retrieval.
pub fn operation_features(fact: &ExtractedFact, retrieved: &[RetrievedItem]) -> Vec<f64> {
    let max_sim = retrieved.iter().map(|m| m.score).fold(0.0f64, f64::max);
    let mean_sim = if retrieved.is_empty() {
        0.0
    } else {
        retrieved.iter().map(|m| m.score).sum::<f64>() / retrieved.len() as f64
    };
    let fact_tokens = token_set(&fact.text);
    let best_overlap = retrieved
        .first()
        .map(|best| overlap_ratio(&fact_tokens, &token_set(&best.text)))
        .unwrap_or(0.0);
    let negation = if has_negation_marker(&fact.text) { 1.0 } else { 0.0 };
    let bank_empty = if retrieved.is_empty() { 1.0 } else { 0.0 };
    vec![max_sim, mean_sim, best_overlap, negation, bank_empty, 1.0]
}

/// Per-memory distillation features: similarity, question-token overlap,
/// recency rank within the retrieved set (newest 1, oldest 0), bias.
pub fn answer_memory_features(question: &str, retrieved: &[RetrievedItem]) -> Vec<Vec<f64>> {
    let question_tokens = token_set(question);
    let n = retrieved.len();
    retrieved
        .iter()
        .map(|item| {
            let overlap = overlap_ratio(&question_tokens, &token_set(&item.text));
            let older = retrieved
                .iter()
                .filter(|other| {
                    (other.updated_at, other.id) < (item.updated_at, item.id)
                })
                .count();
            let recency = if n <= 1 { 1.0 } else { older as f64 / (n - 1) as f64 };
            vec![item.score, overlap, recency, 1.0]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::MemoryId;

    fn fact(text: &str) -> ExtractedFact {
        ExtractedFact { text: text.into(), source_turn_id: 0, speaker: "Alice".into() }
    }

    fn item(id: u64, score: f64, text: &str, updated_at: u64) -> RetrievedItem {
        RetrievedItem { id: MemoryId(id), score, text: text.into(), speaker: None, updated_at }
    }

    #[test]
    fn empty_retrieval_sets_bank_empty_flag() {
        let features = operation_features(&fact("Alice's pet is a parrot"), &[]);
        assert_eq!(features, vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn negation_marker_detected() {
        let features =
            operation_features(&fact("Alice's pet is not a hamster anymore"), &[]);
        assert_eq!(features[3], 1.0);
        assert_eq!(operation_features(&fact("Alice isn't a fan of tea"), &[])[3], 1.0);
        assert_eq!(operation_features(&fact("Alice's pet is a hamster"), &[])[3], 0.0);
    }

    #[test]
    fn overlap_uses_best_match() {
        let retrieved = vec![
            item(0, 0.9, "Alice's pet is a hamster", 0),
            item(1, 0.1, "totally unrelated", 1),
        ];
        let features = operation_features(&fact("Alice's pet is a gecko"), &retrieved);
        assert!((features[0] - 0.9).abs() < 1e-12);
        assert!((features[1] - 0.5).abs() < 1e-12);
        // 5 of the fact's 6 distinct tokens appear in the best match.
        assert!((features[2] - 5.0 / 6.0).abs() < 1e-12, "{}", features[2]);
    }

    #[test]
    fn recency_ranks_newest_highest() {
        let retrieved = vec![
            item(0, 0.5, "old entry about color", 2),
            item(1, 0.5, "newer entry about color", 10),
            item(2, 0.5, "oldest entry about color", 0),
        ];
        let features = answer_memory_features("What is the color?", &retrieved);
        assert_eq!(features[1][2], 1.0);
        assert_eq!(features[0][2], 0.5);
        assert_eq!(features[2][2], 0.0);
        assert!(features.iter().all(|f| f[3] == 1.0));
    }
}
