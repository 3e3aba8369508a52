// Scratch harness for the answer-agent training setup.

use memrl::dataset::{build_answer_tuples, generate_synthetic, SyntheticConfig};
use memrl::pipeline::{train_answer_agent, TrainerKind};
use memrl::policy::{AnswerPolicyParameters, AnswerRule};
use memrl::rl::{em_reward, TrainerConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tuples_from(seeds: std::ops::Range<u64>) -> Vec<memrl::dataset::AnswerTuple> {
    let mut tuples = Vec::new();
    for seed in seeds {
        let corpus = generate_synthetic(&SyntheticConfig {
            seed,
            n_facts: 8,
            ..SyntheticConfig::default()
        });
        let bank = corpus.script.replay();
        tuples.extend(build_answer_tuples(&corpus.dialogue, &bank, 30));
    }
    tuples
}

fn greedy_em(tuples: &[memrl::dataset::AnswerTuple], params: &AnswerPolicyParameters) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let total: f64 = tuples
        .iter()
        .map(|t| {
            let (s, _) = params.sample_with_step(&t.question, &t.retrieved, 0.0, &mut rng);
            em_reward(&s.action.answer, &t.gold_answer)
        })
        .sum();
    total / tuples.len() as f64
}

fn ablation_em(tuples: &[memrl::dataset::AnswerTuple], params: &AnswerPolicyParameters) -> f64 {
    let total: f64 = tuples
        .iter()
        .map(|t| em_reward(&params.answer_full_context(&t.question, &t.retrieved), &t.gold_answer))
        .sum();
    total / tuples.len() as f64
}

fn main() {
    let train = tuples_from(1000..1025);
    let held_out = tuples_from(5000..5015);
    println!("train tuples {}, held-out {}", train.len(), held_out.len());

    let zeros = AnswerPolicyParameters::zeros(AnswerRule::ValueField);
    println!("untrained greedy EM: {:.4}", greedy_em(&held_out, &zeros));
    println!(
        "baseline heuristic EM: {:.4}",
        greedy_em(&held_out, &AnswerPolicyParameters::baseline(AnswerRule::ValueField))
    );

    for (name, kind, lr, beta, steps) in [
        ("grpo b0.05 lr0.3 s2000", TrainerKind::Grpo, 0.3, 0.05, 2000),
        ("grpo b0.05 lr0.3 s5000", TrainerKind::Grpo, 0.3, 0.05, 5000),
        ("grpo b0.01 lr0.5 s5000", TrainerKind::Grpo, 0.5, 0.01, 5000),
        ("ppo  lr0.3 s5000", TrainerKind::Ppo, 0.3, 0.01, 5000),
        ("ppo  lr0.5 s5000", TrainerKind::Ppo, 0.5, 0.01, 5000),
        ("ppo  lr0.5 s10000", TrainerKind::Ppo, 0.5, 0.01, 10000),
    ] {
        let config = TrainerConfig {
            actor_lr: lr,
            critic_lr: 0.2,
            beta,
            group_size: 4,
            seed: 7,
            max_steps: steps,
            ..TrainerConfig::default()
        };
        let artifacts = train_answer_agent(&train, &zeros, kind, &config, None).unwrap();
        let em = greedy_em(&held_out, &artifacts.params);
        let ablation = ablation_em(&held_out, &artifacts.params);
        println!(
            "{name}: held-out EM {em:.4}, full-context ablation EM {ablation:.4}, gap {:+.4}, weights {:?}",
            em - ablation,
            artifacts
                .params
                .selection_weights()
                .iter()
                .map(|x| (x * 100.0).round() / 100.0)
                .collect::<Vec<_>>()
        );
    }
}
