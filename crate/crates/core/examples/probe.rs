// Diagnostic: per-event-kind reward for each forced operation on tuples.

use memrl::dataset::{generate_synthetic, synthetic_manager_tuples, SyntheticConfig};
use memrl::memory::{DecisionKind, MemoryOperationDecision};
use memrl::pipeline::{answer_question, RuleExtractor, FactExtractor};
use memrl::policy::{compose_update_text, AnswerPolicyParameters, AnswerRule};
use memrl::retrieval::Retriever;
use memrl::rl::em_reward;
use std::collections::HashMap;

fn main() {
    let corpora: Vec<_> = (0..12)
        .map(|i| {
            generate_synthetic(&SyntheticConfig {
                seed: 1000 + i as u64,
                n_facts: 8,
                ..SyntheticConfig::default()
            })
        })
        .collect();
    let frozen = AnswerPolicyParameters::baseline(AnswerRule::ValueField);
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);

    // (event kind, distractor, op) -> (total reward, count)
    let mut table: HashMap<(String, DecisionKind), (f64, usize)> = HashMap::new();

    for corpus in &corpora {
        let tuples = synthetic_manager_tuples(corpus);
        for tuple in &tuples {
            let facts = RuleExtractor.extract(&tuple.current_turn).unwrap();
            if facts.len() != 1 {
                continue; // probe single-decision tuples only
            }
            let fact = &facts[0];
            let event = corpus
                .script
                .events
                .iter()
                .find(|e| e.turn_id == tuple.current_turn.turn_id)
                .unwrap();
            let label = format!(
                "{:?}{}",
                event.kind,
                if event.distractor { "+distract" } else { "" }
            );
            let mut retriever = Retriever::default();
            let retrieved = retriever
                .retrieve_top_k(&fact.text, &tuple.temporal_bank, 10)
                .materialize(&tuple.temporal_bank);

            for kind in DecisionKind::ALL {
                let decision = match kind {
                    DecisionKind::Add => MemoryOperationDecision::add(fact.text.clone()),
                    DecisionKind::Update => match retrieved.first() {
                        Some(best) => MemoryOperationDecision::update(
                            best.id,
                            compose_update_text(&best.text, &fact.text),
                        ),
                        None => MemoryOperationDecision::add(fact.text.clone()),
                    },
                    DecisionKind::Delete => match retrieved.first() {
                        Some(best) => MemoryOperationDecision::delete(best.id),
                        None => MemoryOperationDecision::add(fact.text.clone()),
                    },
                    DecisionKind::Noop => MemoryOperationDecision::noop(),
                };
                let mut bank = tuple.temporal_bank.clone();
                bank.apply_attributed(&decision, Some(&fact.speaker), false).unwrap();
                let mut reward = 0.0;
                for qa in &tuple.qa {
                    let outcome =
                        answer_question(&qa.question, &bank, &frozen, 60, 0.0, &mut rng).unwrap();
                    reward += em_reward(&outcome.answer, &qa.gold_answer);
                }
                reward /= tuple.qa.len() as f64;
                let entry = table.entry((label.clone(), kind)).or_insert((0.0, 0));
                entry.0 += reward;
                entry.1 += 1;
            }
        }
    }

    let mut labels: Vec<String> = table.keys().map(|(l, _)| l.clone()).collect();
    labels.sort();
    labels.dedup();
    println!("{:<22} {:>8} {:>8} {:>8} {:>8}  (n)", "state", "ADD", "UPDATE", "DELETE", "NOOP");
    for label in labels {
        let mut row = format!("{label:<22}");
        let mut n = 0;
        for kind in DecisionKind::ALL {
            let (total, count) = table[&(label.clone(), kind)];
            n = count;
            row.push_str(&format!(" {:>8.4}", total / count as f64));
        }
        println!("{row}  ({n})");
    }
}
