// Scratch harness for calibrating the desk-scale learning setup.

use memrl::dataset::{
    generate_synthetic, synthetic_manager_tuples, OracleManagerPolicy, SyntheticConfig,
};
use memrl::pipeline::{
    greedy_manager_em, train_memory_manager, ManagerEpisode, RuleExtractor, TrainerKind,
};
use memrl::policy::{AnswerPolicyParameters, AnswerRule, OperationPolicyParameters};
use memrl::rl::TrainerConfig;

fn main() {
    // Enough dialogues to yield ~200 training tuples.
    let corpora: Vec<_> = (0..12)
        .map(|i| {
            generate_synthetic(&SyntheticConfig {
                seed: 1000 + i as u64,
                n_facts: 8,
                ..SyntheticConfig::default()
            })
        })
        .collect();
    let mut tuples = Vec::new();
    for c in &corpora {
        tuples.extend(synthetic_manager_tuples(c));
    }
    tuples.truncate(200);
    println!("training tuples: {}", tuples.len());
    let train_eps: Vec<ManagerEpisode> =
        tuples.iter().map(ManagerEpisode::from_manager_tuple).collect();

    let test_corpora: Vec<_> = (0..40)
        .map(|i| {
            generate_synthetic(&SyntheticConfig {
                seed: 5000 + i as u64,
                n_facts: 8,
                ..SyntheticConfig::default()
            })
        })
        .collect();
    let test_eps: Vec<ManagerEpisode> =
        test_corpora.iter().map(|c| ManagerEpisode::from_dialogue(&c.dialogue)).collect();

    let frozen = AnswerPolicyParameters::baseline(AnswerRule::ValueField);
    let zeros = OperationPolicyParameters::instruction_prior();

    let untrained =
        greedy_manager_em(&test_eps, &zeros, &frozen, &RuleExtractor, 10, 60).unwrap();
    println!("untrained greedy EM: {untrained:.4}");

    let mut ceiling_total = 0.0;
    let mut ceiling_n = 0;
    for c in &test_corpora {
        let manager = OracleManagerPolicy::new(&c.script);
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let (bank, _) = memrl::pipeline::construct_memory_bank(
            &c.dialogue,
            &manager,
            &RuleExtractor,
            0.0,
            10,
            &mut rng,
        )
        .unwrap();
        for qa in &c.dialogue.qa {
            let outcome =
                memrl::pipeline::answer_question(&qa.question, &bank, &frozen, 60, 0.0, &mut rng)
                    .unwrap();
            ceiling_total += memrl::rl::em_reward(&outcome.answer, &qa.gold_answer);
            ceiling_n += 1;
        }
    }
    let ceiling = ceiling_total / ceiling_n as f64;
    println!("oracle-op ceiling EM (frozen answerer): {ceiling:.4}");

    let mut grid = Vec::new();
    grid.push(("grpo committed".to_string(), TrainerKind::Grpo, 0.3, 0.15, 8000usize, 7u64));
    grid.push(("ppo  committed".to_string(), TrainerKind::Ppo, 0.3, 0.01, 20000usize, 7u64));
    for (name, kind, lr, beta, steps, seed) in grid {
        let critic_lr = 0.2;
        let config = TrainerConfig {
            actor_lr: lr,
            critic_lr,
            beta,
            group_size: 4,
            seed,
            max_steps: steps,
            ..TrainerConfig::default()
        };
        let started = std::time::Instant::now();
        let artifacts = train_memory_manager(
            &train_eps,
            &zeros,
            &frozen,
            &RuleExtractor,
            kind,
            &config,
            None,
        )
        .unwrap();
        let trained_em =
            greedy_manager_em(&test_eps, &artifacts.params, &frozen, &RuleExtractor, 10, 60)
                .unwrap();
        let rewards: Vec<f64> = artifacts.curve.iter().map(|p| p.mean_reward).collect();
        let window = 200;
        let smooth: Vec<f64> = (0..rewards.len())
            .map(|i| {
                let lo = i.saturating_sub(window - 1);
                rewards[lo..=i].iter().sum::<f64>() / (i - lo + 1) as f64
            })
            .collect();
        let final_reward = smooth.last().copied().unwrap_or(0.0);
        let initial = smooth.get(window.min(smooth.len()) - 1).copied().unwrap_or(0.0);
        let target = initial + 0.8 * (final_reward - initial);
        let step80 = (window..smooth.len())
            .find(|t| smooth[*t] >= target)
            .unwrap_or(usize::MAX);
        println!(
            "{name}: trained EM {trained_em:.4} (ceiling ratio {:.3}), final reward {final_reward:.4}, step80 {step80}, elapsed {:?}",
            trained_em / ceiling,
            started.elapsed()
        );
        let _ = artifacts.params.weights();
        // Greedy argmax in canonical states (features: max_sim, mean_sim,
        // overlap, negation, bank_empty, bias).


        // Failure analysis on the first few test dialogues.
        if false {
            let mut shown = 0;
            for c in test_corpora.iter().take(10) {
                let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
                let (bank, _) = memrl::pipeline::construct_memory_bank(
                    &c.dialogue, &artifacts.params, &RuleExtractor, 0.0, 10, &mut rng,
                ).unwrap();
                for qa in &c.dialogue.qa {
                    let outcome = memrl::pipeline::answer_question(
                        &qa.question, &bank, &frozen, 60, 0.0, &mut rng,
                    ).unwrap();
                    if memrl::rl::em_reward(&outcome.answer, &qa.gold_answer) == 0.0 && shown < 8 {
                        shown += 1;
                        println!("  FAIL {:?} [{:?}] gold {:?} got {:?}", qa.question, qa.category, qa.gold_answer, outcome.answer);
                        for e in bank.iter() {
                            if qa.question.to_lowercase().split_whitespace().filter(|t| e.text.to_lowercase().contains(*t)).count() > 3 {
                                println!("       bank: {:?}", e.text);
                            }
                        }
                    }
                }
            }
        }
    }
}
