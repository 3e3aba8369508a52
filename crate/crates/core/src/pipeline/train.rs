//! The two training loops.
//!
//! Manager training rolls out whole episodes — construct or extend a bank
//! with sampled operations at τ = 1, answer the episode's questions with
//! the frozen answer policy at τ = 0, reward by mean exact match — and
//! updates after each episode batch. Answer training samples candidate
//! distillation masks per tuple. Episode seeds are pre-assigned from the
//! config seed, so runs reproduce regardless of collection order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use super::answer::retrieve_for_question;
use super::extract::FactExtractor;
use super::PipelineError;
use crate::dataset::{AnswerTuple, Dialogue, DialogueTurn, ManagerTuple, QAPair};
use crate::memory::MemoryBank;
use crate::metrics::em_reward;
use crate::policy::features::{ANSWER_FEATURE_COUNT, OP_FEATURE_COUNT};
use crate::policy::{
    AnswerPolicy, AnswerPolicyParameters, OperationPolicyParameters, PolicyStep, ReferencePolicy,
};
use crate::retrieval::{Retriever, DEFAULT_ANSWER_K, DEFAULT_MANAGER_K};
use crate::rl::{
    grpo_update_step, ppo_update_step, CriticParameters, GroupSample, RlError, StepDiagnostics,
    TrainerConfig, Trajectory,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainerKind {
    Ppo,
    Grpo,
}

impl TrainerKind {
    pub fn parse(raw: &str) -> Option<Self> {
        match raw.to_ascii_lowercase().as_str() {
            "ppo" => Some(TrainerKind::Ppo),
            "grpo" => Some(TrainerKind::Grpo),
            _ => None,
        }
    }
}

/// One manager training episode: an initial bank to extend, the turns to
/// process, and the questions that produce the outcome reward.
#[derive(Debug, Clone)]
pub struct ManagerEpisode {
    pub initial_bank: MemoryBank,
    pub turns: Vec<DialogueTurn>,
    pub questions: Vec<QAPair>,
}

impl ManagerEpisode {
    pub fn from_dialogue(dialogue: &Dialogue) -> Self {
        Self {
            initial_bank: MemoryBank::new(),
            turns: dialogue.turns().cloned().collect(),
            questions: dialogue.qa.clone(),
        }
    }

    pub fn from_manager_tuple(tuple: &ManagerTuple) -> Self {
        Self {
            initial_bank: tuple.temporal_bank.clone(),
            turns: vec![tuple.current_turn.clone()],
            questions: tuple.qa.clone(),
        }
    }
}

/// One line of the reward-curve log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardCurvePoint {
    pub step: usize,
    pub mean_reward: f64,
    pub clip_fraction: f64,
    pub kl: Option<f64>,
    pub loss: f64,
}

impl RewardCurvePoint {
    fn from_diagnostics(step: usize, diag: &StepDiagnostics) -> Self {
        Self {
            step,
            mean_reward: diag.mean_reward,
            clip_fraction: diag.clip_fraction,
            kl: diag.kl,
            loss: -diag.objective,
        }
    }
}

/// Trained parameters plus the reward curve that produced them.
#[derive(Debug, Clone)]
pub struct TrainingArtifacts<P> {
    pub params: P,
    pub curve: Vec<RewardCurvePoint>,
}

/// Deterministic per-rollout seed derivation (splitmix-style).
fn derive_seed(base: u64, episode: u64, candidate: u64) -> u64 {
    let mut z = base
        .wrapping_add(episode.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(candidate.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

struct CurveWriter {
    file: Option<std::io::BufWriter<std::fs::File>>,
}

impl CurveWriter {
    fn create(run_dir: Option<&Path>, name: &str) -> Result<Self, PipelineError> {
        let file = match run_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                Some(std::io::BufWriter::new(std::fs::File::create(dir.join(name))?))
            }
            None => None,
        };
        Ok(Self { file })
    }

    fn append(&mut self, point: &RewardCurvePoint) -> Result<(), PipelineError> {
        if let Some(file) = &mut self.file {
            writeln!(file, "{}", serde_json::to_string(point).expect("curve point serializes"))?;
        }
        Ok(())
    }
}

fn write_checkpoint<P>(
    run_dir: Option<&Path>,
    step: usize,
    config: &TrainerConfig,
    save: impl Fn(&Path) -> Result<(), crate::policy::PolicyError>,
    _params: &P,
) -> Result<(), PipelineError> {
    let Some(dir) = run_dir else { return Ok(()) };
    let checkpoint_dir = dir.join(format!("checkpoint-{step:06}"));
    std::fs::create_dir_all(&checkpoint_dir)?;
    save(&checkpoint_dir.join("policy.params"))?;
    let config_echo =
        serde_json::to_string_pretty(config).expect("trainer config serializes");
    std::fs::write(checkpoint_dir.join("config.json"), config_echo)?;
    Ok(())
}

/// Rolls out one manager episode at τ = 1 and scores it with the frozen
/// answer policy at τ = 0.
fn rollout_manager_episode(
    episode: &ManagerEpisode,
    actor: &OperationPolicyParameters,
    frozen_answer: &dyn AnswerPolicy,
    extractor: &dyn FactExtractor,
    manager_k: usize,
    answer_k: usize,
    seed: u64,
) -> Result<Trajectory, PipelineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bank = episode.initial_bank.clone();
    let mut retriever = Retriever::default();
    let mut steps: Vec<PolicyStep> = Vec::new();
    let mut log_prob_old = 0.0;

    for turn in &episode.turns {
        for fact in extractor.extract(turn)? {
            let retrieved =
                retriever.retrieve_top_k(&fact.text, &bank, manager_k).materialize(&bank);
            let (sample, step) = actor.sample_with_step(&fact, &retrieved, 1.0, &mut rng);
            log_prob_old += sample.log_prob.expect("parametric policies report log-probs");
            steps.push(step);
            bank.apply_attributed(&sample.action, Some(&fact.speaker), false)?;
        }
    }

    let mut reward = 0.0;
    if !episode.questions.is_empty() {
        for qa in &episode.questions {
            let retrieved = retrieve_for_question(&qa.question, &bank, answer_k);
            let outcome = frozen_answer.answer(&qa.question, &retrieved, 0.0, &mut rng)?;
            reward += em_reward(&outcome.answer, &qa.gold_answer);
        }
        reward /= episode.questions.len() as f64;
    }

    let state_features = match steps.first() {
        Some(PolicyStep::Operation { features, .. }) => features.clone(),
        _ => vec![0.0; OP_FEATURE_COUNT],
    };
    Ok(Trajectory { state_features, steps, reward, log_prob_old: Some(log_prob_old) })
}

/// Greedy (τ = 0) downstream exact match of a manager policy over a set of
/// episodes: the evaluation number training is meant to move.
pub fn greedy_manager_em(
    episodes: &[ManagerEpisode],
    actor: &OperationPolicyParameters,
    frozen_answer: &dyn AnswerPolicy,
    extractor: &dyn FactExtractor,
    manager_k: usize,
    answer_k: usize,
) -> Result<f64, PipelineError> {
    let mut total = 0.0;
    let mut count = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for episode in episodes {
        let mut bank = episode.initial_bank.clone();
        let mut retriever = Retriever::default();
        for turn in &episode.turns {
            for fact in extractor.extract(turn)? {
                let retrieved =
                    retriever.retrieve_top_k(&fact.text, &bank, manager_k).materialize(&bank);
                let (sample, _) = actor.sample_with_step(&fact, &retrieved, 0.0, &mut rng);
                bank.apply_attributed(&sample.action, Some(&fact.speaker), false)?;
            }
        }
        for qa in &episode.questions {
            let retrieved = retrieve_for_question(&qa.question, &bank, answer_k);
            let outcome = frozen_answer.answer(&qa.question, &retrieved, 0.0, &mut rng)?;
            total += em_reward(&outcome.answer, &qa.gold_answer);
            count += 1;
        }
    }
    Ok(if count == 0 { 0.0 } else { total / count as f64 })
}

/// Trains the memory manager against a frozen answer policy.
///
/// The answer policy is taken by shared reference to an immutable trait
/// object: the trainer has no way to modify it, which is the freeze
/// contract. GRPO rolls `group_size` candidates per episode; PPO rolls the
/// same number as an ungrouped minibatch so step counts are comparable.
pub fn train_memory_manager(
    episodes: &[ManagerEpisode],
    actor: &OperationPolicyParameters,
    frozen_answer: &dyn AnswerPolicy,
    extractor: &dyn FactExtractor,
    kind: TrainerKind,
    config: &TrainerConfig,
    run_dir: Option<&Path>,
) -> Result<TrainingArtifacts<OperationPolicyParameters>, PipelineError> {
    if episodes.is_empty() {
        return Err(PipelineError::Rl(RlError::EmptyBatch));
    }
    config.validate(kind == TrainerKind::Grpo).map_err(PipelineError::Rl)?;
    let mut current = actor.clone();
    let reference = ReferencePolicy::freeze(actor);
    let mut critic = CriticParameters::zeros(OP_FEATURE_COUNT);
    let mut curve = Vec::new();
    let mut writer = CurveWriter::create(run_dir, "manager-reward-curve.jsonl")?;

    // max_steps bounds the update count; the episode stream cycles, so
    // configuring more steps than episodes runs multiple epochs.
    let total_steps =
        if config.max_steps == usize::MAX { episodes.len() } else { config.max_steps };
    for step in 0..total_steps {
        let episode = &episodes[step % episodes.len()];
        let candidates: Vec<Trajectory> = (0..config.group_size)
            .map(|candidate| {
                rollout_manager_episode(
                    episode,
                    &current,
                    frozen_answer,
                    extractor,
                    DEFAULT_MANAGER_K,
                    DEFAULT_ANSWER_K,
                    derive_seed(config.seed, step as u64, candidate as u64),
                )
            })
            .collect::<Result<_, _>>()?;

        let diagnostics = match kind {
            TrainerKind::Grpo => {
                let group = GroupSample::new(candidates).map_err(PipelineError::Rl)?;
                let (next, diag) =
                    grpo_update_step(&[group], &current, reference.get(), config)
                        .map_err(PipelineError::Rl)?;
                current = next;
                diag
            }
            TrainerKind::Ppo => {
                let (next, next_critic, diag) =
                    ppo_update_step(&candidates, &current, &critic, config)
                        .map_err(PipelineError::Rl)?;
                current = next;
                critic = next_critic;
                diag
            }
        };
        let point = RewardCurvePoint::from_diagnostics(step, &diagnostics);
        writer.append(&point)?;
        curve.push(point);
        if config.checkpoint_every > 0 && (step + 1) % config.checkpoint_every == 0 {
            let snapshot = current.clone();
            write_checkpoint(
                run_dir,
                step + 1,
                config,
                |path| crate::policy::save_operation_params(&snapshot, path),
                &current,
            )?;
        }
    }

    Ok(TrainingArtifacts { params: current, curve })
}

fn rollout_answer_tuple(
    tuple: &AnswerTuple,
    actor: &AnswerPolicyParameters,
    seed: u64,
) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (sample, step) = actor.sample_with_step(&tuple.question, &tuple.retrieved, 1.0, &mut rng);
    let reward = em_reward(&sample.action.answer, &tuple.gold_answer);
    let state_features = match &step {
        PolicyStep::Distillation { memory_features, .. } if !memory_features.is_empty() => {
            let mut mean = vec![0.0; ANSWER_FEATURE_COUNT];
            for row in memory_features {
                for (m, x) in mean.iter_mut().zip(row) {
                    *m += x / memory_features.len() as f64;
                }
            }
            mean
        }
        _ => vec![0.0; ANSWER_FEATURE_COUNT],
    };
    Trajectory {
        state_features,
        steps: vec![step],
        reward,
        log_prob_old: sample.log_prob,
    }
}

/// Greedy (τ = 0) exact match of an answer policy over tuples.
pub fn greedy_answer_em(tuples: &[AnswerTuple], actor: &AnswerPolicyParameters) -> f64 {
    if tuples.is_empty() {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let total: f64 = tuples
        .iter()
        .map(|t| {
            let (sample, _) = actor.sample_with_step(&t.question, &t.retrieved, 0.0, &mut rng);
            em_reward(&sample.action.answer, &t.gold_answer)
        })
        .sum();
    total / tuples.len() as f64
}

/// Trains the answer agent on retrieved-context tuples. GRPO groups the
/// `group_size` candidate masks sampled for one tuple (one shared state);
/// PPO treats them as an ungrouped minibatch with the linear critic.
pub fn train_answer_agent(
    tuples: &[AnswerTuple],
    actor: &AnswerPolicyParameters,
    kind: TrainerKind,
    config: &TrainerConfig,
    run_dir: Option<&Path>,
) -> Result<TrainingArtifacts<AnswerPolicyParameters>, PipelineError> {
    if tuples.is_empty() {
        return Err(PipelineError::Rl(RlError::EmptyBatch));
    }
    config.validate(kind == TrainerKind::Grpo).map_err(PipelineError::Rl)?;
    let mut current = actor.clone();
    let reference = ReferencePolicy::freeze(actor);
    let mut critic = CriticParameters::zeros(ANSWER_FEATURE_COUNT);
    let mut curve = Vec::new();
    let mut writer = CurveWriter::create(run_dir, "answer-reward-curve.jsonl")?;

    let total_steps =
        if config.max_steps == usize::MAX { tuples.len() } else { config.max_steps };
    for step in 0..total_steps {
        let tuple = &tuples[step % tuples.len()];
        let candidates: Vec<Trajectory> = (0..config.group_size)
            .map(|candidate| {
                rollout_answer_tuple(
                    tuple,
                    &current,
                    derive_seed(config.seed, step as u64, candidate as u64),
                )
            })
            .collect();

        let diagnostics = match kind {
            TrainerKind::Grpo => {
                let group = GroupSample::new(candidates).map_err(PipelineError::Rl)?;
                let (next, diag) =
                    grpo_update_step(&[group], &current, reference.get(), config)
                        .map_err(PipelineError::Rl)?;
                current = next;
                diag
            }
            TrainerKind::Ppo => {
                let (next, next_critic, diag) =
                    ppo_update_step(&candidates, &current, &critic, config)
                        .map_err(PipelineError::Rl)?;
                current = next;
                critic = next_critic;
                diag
            }
        };
        let point = RewardCurvePoint::from_diagnostics(step, &diagnostics);
        writer.append(&point)?;
        curve.push(point);
        if config.checkpoint_every > 0 && (step + 1) % config.checkpoint_every == 0 {
            let snapshot = current.clone();
            write_checkpoint(
                run_dir,
                step + 1,
                config,
                |path| crate::policy::save_answer_params(&snapshot, path),
                &current,
            )?;
        }
    }

    Ok(TrainingArtifacts { params: current, curve })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SyntheticConfig};
    use crate::pipeline::RuleExtractor;
    use crate::policy::AnswerRule;

    fn episodes(n: usize, base_seed: u64) -> Vec<ManagerEpisode> {
        (0..n)
            .map(|i| {
                let corpus = generate_synthetic(&SyntheticConfig {
                    seed: base_seed + i as u64,
                    n_facts: 6,
                    ..SyntheticConfig::default()
                });
                ManagerEpisode::from_dialogue(&corpus.dialogue)
            })
            .collect()
    }

    #[test]
    fn zero_reward_environment_stays_flat() {
        // Gold answers are unreachable: replace them with garbage.
        let mut eps = episodes(6, 100);
        for ep in &mut eps {
            for q in &mut ep.questions {
                q.gold_answer = "unreachable-xyzzy".into();
            }
        }
        let actor = OperationPolicyParameters::zeros();
        let frozen = AnswerPolicyParameters::baseline(AnswerRule::ValueField);
        let config = TrainerConfig { actor_lr: 0.5, seed: 5, ..TrainerConfig::default() };
        let artifacts = train_memory_manager(
            &eps,
            &actor,
            &frozen,
            &RuleExtractor,
            TrainerKind::Grpo,
            &config,
            None,
        )
        .unwrap();
        assert!(artifacts.curve.iter().all(|p| p.mean_reward == 0.0));
        // Zero advantages and zero KL at the reference: parameters untouched.
        assert_eq!(artifacts.params.weights(), actor.weights());
    }

    #[test]
    fn manager_training_is_deterministic_under_seed() {
        let eps = episodes(4, 200);
        let actor = OperationPolicyParameters::zeros();
        let frozen = AnswerPolicyParameters::baseline(AnswerRule::ValueField);
        let config = TrainerConfig { actor_lr: 0.5, seed: 9, ..TrainerConfig::default() };
        let run = |cfg: &TrainerConfig| {
            train_memory_manager(
                &eps,
                &actor,
                &frozen,
                &RuleExtractor,
                TrainerKind::Grpo,
                cfg,
                None,
            )
            .unwrap()
        };
        let a = run(&config);
        let b = run(&config);
        assert_eq!(a.params.weights(), b.params.weights());
        assert_eq!(a.curve, b.curve);
    }

    #[test]
    fn frozen_answer_policy_is_untouched_by_training() {
        let eps = episodes(3, 300);
        let actor = OperationPolicyParameters::zeros();
        let frozen = AnswerPolicyParameters::baseline(AnswerRule::ValueField);
        let before = frozen.clone();
        let config = TrainerConfig { actor_lr: 0.5, ..TrainerConfig::default() };
        train_memory_manager(
            &eps,
            &actor,
            &frozen,
            &RuleExtractor,
            TrainerKind::Ppo,
            &config,
            None,
        )
        .unwrap();
        assert_eq!(frozen, before);
    }

    #[test]
    fn grpo_answer_training_rejects_group_of_one() {
        let corpus = generate_synthetic(&SyntheticConfig::default());
        let bank = corpus.script.replay();
        let tuples = crate::dataset::build_answer_tuples(&corpus.dialogue, &bank, 30);
        let actor = AnswerPolicyParameters::zeros(AnswerRule::ValueField);
        let config = TrainerConfig { group_size: 1, ..TrainerConfig::default() };
        let err = train_answer_agent(&tuples, &actor, TrainerKind::Grpo, &config, None)
            .unwrap_err();
        assert!(matches!(err, PipelineError::Rl(RlError::GroupTooSmall(1))), "{err}");
    }
}
