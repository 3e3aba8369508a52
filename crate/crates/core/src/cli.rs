//! Command-line entry point.
//!
//! Subcommands: `synth-data`, `build-bank`, `train-manager`, `train-answer`,
//! `eval`, `judge`. Every run writes its outputs plus a manifest into a
//! fresh per-run directory under `--out-dir` (timestamp + seed; reruns
//! never overwrite). Config precedence: CLI flag > config file > environment
//! > built-in default. Exit codes: 0 success, 1 runtime error, 2 usage,
//! 3 invalid configuration.

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::dataset::{
    build_answer_tuples, generate_synthetic, load_locomo, save_corpus, split_dataset,
    OracleAnswerPolicy, OracleManagerPolicy, SyntheticConfig, SyntheticScript,
};
use crate::gateway::{ChatGateway, EndpointProfile, HttpGateway, StubGateway};
use crate::memory::save_bank_path;
use crate::metrics::{aggregate_report, bleu1, format_report, llm_judge, token_f1, JudgeLabel, ScoreTriple};
use crate::pipeline::{
    construct_memory_bank, evaluate, train_answer_agent, train_memory_manager, EvalOptions,
    ManagerEpisode, RuleExtractor, TrainerKind,
};
use crate::policy::{
    load_answer_params, load_operation_params, save_answer_params, save_operation_params,
    AnswerPolicy, AnswerPolicyParameters, AnswerRule, ManagerPolicy, OperationPolicyParameters,
};
use crate::rl::TrainerConfig;

#[derive(Parser)]
#[command(name = "memrl", version, about = "Memory-augmented agent engine and RL harness")]
struct Cli {
    #[command(flatten)]
    common: CommonOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Flat key = value config file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Root directory for per-run output directories.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Offline mode with the scripted stub gateway (default).
    #[arg(long, global = true)]
    stub: bool,
    /// Live gateway mode (requires GATEWAY_* environment variables).
    #[arg(long, global = true, conflicts_with = "stub")]
    live: bool,
    /// Parallelism budget handed to gateway-bound work.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Stub gateway script file (JSON list of {prompt|hash, response}).
    #[arg(long, global = true)]
    scripts: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with its ground-truth oracle sidecar.
    SynthData {
        #[arg(long, default_value_t = 1)]
        dialogues: usize,
        #[arg(long, default_value_t = 3)]
        sessions: usize,
        #[arg(long, default_value_t = 12)]
        facts: usize,
        #[arg(long)]
        revision_rate: Option<f64>,
        #[arg(long)]
        contradiction_rate: Option<f64>,
        #[arg(long)]
        distractor_rate: Option<f64>,
    },
    /// Construct a memory bank for one dialogue and persist it.
    BuildBank {
        #[arg(long)]
        corpus: PathBuf,
        /// Dialogue to process (default: the first).
        #[arg(long)]
        dialogue_id: Option<String>,
        #[arg(long, conflicts_with = "oracle")]
        manager_params: Option<PathBuf>,
        /// Replay the corpus oracle sidecar instead of a policy.
        #[arg(long)]
        oracle: bool,
    },
    /// Train the memory manager against a frozen answer policy.
    TrainManager {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "grpo")]
        trainer: String,
        #[arg(long)]
        group_size: Option<usize>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        actor_lr: Option<f64>,
        #[arg(long)]
        critic_lr: Option<f64>,
        #[arg(long)]
        max_steps: Option<usize>,
        #[arg(long)]
        checkpoint_every: Option<usize>,
        /// Frozen answer policy parameters (default: the built-in baseline).
        #[arg(long)]
        answer_params: Option<PathBuf>,
        #[arg(long)]
        init_params: Option<PathBuf>,
    },
    /// Train the answer agent on retrieved-context tuples.
    TrainAnswer {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "grpo")]
        trainer: String,
        #[arg(long)]
        group_size: Option<usize>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        actor_lr: Option<f64>,
        #[arg(long)]
        critic_lr: Option<f64>,
        #[arg(long)]
        max_steps: Option<usize>,
        #[arg(long)]
        checkpoint_every: Option<usize>,
        #[arg(long)]
        init_params: Option<PathBuf>,
        /// Retrieval depth per participant when building tuples.
        #[arg(long, default_value_t = 30)]
        k_per_participant: usize,
    },
    /// Evaluate policies over a corpus and write the score report.
    Eval {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, conflicts_with = "oracle")]
        manager_params: Option<PathBuf>,
        #[arg(long, conflicts_with = "oracle")]
        answer_params: Option<PathBuf>,
        /// Use the corpus oracle sidecar for both policies.
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value_t = 3)]
        runs: usize,
        /// Score with the LLM judge through the gateway.
        #[arg(long)]
        judge: bool,
        /// Evaluate only the test slice of the 1:1:8 split.
        #[arg(long)]
        test_split_only: bool,
    },
    /// Re-score an answers file with the LLM judge.
    Judge {
        #[arg(long)]
        answers: PathBuf,
    },
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 3,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Flat key = value file settings.
struct FileConfig {
    values: BTreeMap<String, toml::Value>,
}

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let values = match path {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
                let table: toml::Table = text
                    .parse()
                    .map_err(|e| CliError::Config(format!("bad config {}: {e}", path.display())))?;
                table.into_iter().collect()
            }
            None => BTreeMap::new(),
        };
        Ok(Self { values })
    }

    fn u64(&self, key: &str) -> Option<u64> {
        self.values.get(key).and_then(|v| v.as_integer()).map(|v| v as u64)
    }

    fn f64(&self, key: &str) -> Option<f64> {
        self.values.get(key).and_then(|v| match v {
            toml::Value::Float(f) => Some(*f),
            toml::Value::Integer(i) => Some(*i as f64),
            _ => None,
        })
    }

    fn usize(&self, key: &str) -> Option<usize> {
        self.u64(key).map(|v| v as usize)
    }

    fn string(&self, key: &str) -> Option<String> {
        self.values.get(key).and_then(|v| v.as_str()).map(str::to_owned)
    }
}

fn env_u64(key: &str) -> Option<u64> {
    std::env::var(key).ok().and_then(|v| v.parse().ok())
}

/// Resolved run settings shared by all commands.
struct Run {
    seed: u64,
    run_dir: PathBuf,
    live: bool,
    workers: usize,
    scripts: Option<PathBuf>,
    manifest: BTreeMap<String, serde_json::Value>,
}

impl Run {
    fn prepare(common: &CommonOpts, command_name: &str) -> Result<Self, CliError> {
        let file = FileConfig::load(common.config.as_deref())?;
        let seed = common
            .seed
            .or_else(|| file.u64("seed"))
            .or_else(|| env_u64("MEMRL_SEED"))
            .unwrap_or(0);
        let out_root = common
            .out_dir
            .clone()
            .or_else(|| file.string("out_dir").map(PathBuf::from))
            .or_else(|| std::env::var("MEMRL_OUT_DIR").ok().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("runs"));
        let live = if common.live {
            true
        } else if common.stub {
            false
        } else {
            file.string("mode").as_deref() == Some("live")
                || std::env::var("MEMRL_MODE").as_deref() == Ok("live")
        };
        let workers = common
            .workers
            .or_else(|| file.usize("workers"))
            .or_else(|| env_u64("MEMRL_WORKERS").map(|v| v as usize))
            .unwrap_or(4);
        if workers == 0 {
            return Err(CliError::Config("workers must be positive".into()));
        }

        let timestamp = unix_timestamp();
        let mut run_dir = out_root.join(format!("{command_name}-{timestamp}-seed{seed}"));
        let mut suffix = 1;
        while run_dir.exists() {
            suffix += 1;
            run_dir = out_root.join(format!("{command_name}-{timestamp}-seed{seed}-{suffix}"));
        }
        std::fs::create_dir_all(&run_dir).map_err(runtime)?;

        let mut manifest = BTreeMap::new();
        manifest.insert("command".into(), serde_json::json!(command_name));
        manifest.insert("seed".into(), serde_json::json!(seed));
        manifest.insert("mode".into(), serde_json::json!(if live { "live" } else { "stub" }));
        manifest.insert("workers".into(), serde_json::json!(workers));
        manifest.insert("started_unix".into(), serde_json::json!(timestamp));
        manifest.insert(
            "config_precedence".into(),
            serde_json::json!("cli > config file > environment > default"),
        );
        Ok(Self { seed, run_dir, live, workers, scripts: common.scripts.clone(), manifest })
    }

    fn record(&mut self, key: &str, value: serde_json::Value) {
        self.manifest.insert(key.to_string(), value);
    }

    fn record_input_hash(&mut self, label: &str, path: &Path) -> Result<(), CliError> {
        let bytes = std::fs::read(path).map_err(runtime)?;
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        self.record(
            label,
            serde_json::json!({
                "path": path.display().to_string(),
                "sha256": format!("{:x}", hasher.finalize()),
            }),
        );
        Ok(())
    }

    fn finish(&self) -> Result<(), CliError> {
        let manifest = serde_json::to_string_pretty(&self.manifest).map_err(runtime)?;
        std::fs::write(self.run_dir.join("manifest.json"), manifest + "\n").map_err(runtime)?;
        println!("run directory: {}", self.run_dir.display());
        Ok(())
    }

    fn gateway(&self) -> Result<Box<dyn ChatGateway>, CliError> {
        if self.live {
            let mut profile = EndpointProfile::from_env().map_err(|e| CliError::Config(e.to_string()))?;
            profile.max_concurrent = self.workers;
            Ok(Box::new(HttpGateway::new(profile).map_err(runtime)?))
        } else {
            let mut stub = StubGateway::new();
            if let Some(path) = &self.scripts {
                load_stub_scripts(&mut stub, path)?;
            }
            Ok(Box::new(stub))
        }
    }
}

fn unix_timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(serde::Deserialize)]
struct ScriptEntry {
    #[serde(default)]
    prompt: Option<String>,
    #[serde(default)]
    hash: Option<String>,
    response: String,
}

fn load_stub_scripts(stub: &mut StubGateway, path: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read scripts {}: {e}", path.display())))?;
    let entries: Vec<ScriptEntry> = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("bad scripts file: {e}")))?;
    for entry in entries {
        match (entry.prompt, entry.hash) {
            (Some(prompt), _) => stub.script_user_prompt(&prompt, entry.response),
            (None, Some(_)) => {
                return Err(CliError::Config(
                    "hash-keyed scripts need the full request; use `prompt`".into(),
                ))
            }
            (None, None) => {
                return Err(CliError::Config("script entry needs `prompt`".into()));
            }
        }
    }
    Ok(())
}

fn trainer_config(
    file: &FileConfig,
    trainer: &str,
    group_size: Option<usize>,
    epsilon: Option<f64>,
    beta: Option<f64>,
    actor_lr: Option<f64>,
    critic_lr: Option<f64>,
    max_steps: Option<usize>,
    checkpoint_every: Option<usize>,
    seed: u64,
) -> Result<(TrainerKind, TrainerConfig), CliError> {
    let kind = TrainerKind::parse(trainer)
        .ok_or_else(|| CliError::Config(format!("unknown trainer {trainer:?} (ppo|grpo)")))?;
    let defaults = TrainerConfig::default();
    let config = TrainerConfig {
        epsilon: epsilon.or_else(|| file.f64("epsilon")).unwrap_or(defaults.epsilon),
        beta: beta.or_else(|| file.f64("beta")).unwrap_or(defaults.beta),
        group_size: group_size.or_else(|| file.usize("group_size")).unwrap_or(defaults.group_size),
        actor_lr: actor_lr.or_else(|| file.f64("actor_lr")).unwrap_or(defaults.actor_lr),
        critic_lr: critic_lr.or_else(|| file.f64("critic_lr")).unwrap_or(defaults.critic_lr),
        seed,
        batch_size: file.usize("batch_size").unwrap_or(defaults.batch_size),
        max_steps: max_steps.or_else(|| file.usize("max_steps")).unwrap_or(defaults.max_steps),
        checkpoint_every: checkpoint_every
            .or_else(|| file.usize("checkpoint_every"))
            .unwrap_or(defaults.checkpoint_every),
    };
    config
        .validate(kind == TrainerKind::Grpo)
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok((kind, config))
}

fn load_corpus_with_sidecar(
    corpus: &Path,
) -> Result<(Vec<crate::dataset::Dialogue>, Option<Vec<SyntheticScript>>), CliError> {
    let loaded = load_locomo(corpus).map_err(runtime)?;
    let sidecar_path = corpus.with_extension("oracle.json");
    let scripts = if sidecar_path.exists() {
        let text = std::fs::read_to_string(&sidecar_path).map_err(runtime)?;
        let scripts: Vec<SyntheticScript> = serde_json::from_str(&text)
            .map_err(|e| CliError::Runtime(format!("bad oracle sidecar: {e}")))?;
        Some(scripts)
    } else {
        None
    };
    Ok((loaded.dialogues, scripts))
}

fn manager_policy_for(
    params: Option<&Path>,
    oracle: bool,
    scripts: Option<&[SyntheticScript]>,
) -> Result<Box<dyn ManagerPolicy>, CliError> {
    if oracle {
        let scripts = scripts.ok_or_else(|| {
            CliError::Config("--oracle requires the corpus oracle sidecar".into())
        })?;
        let merged = SyntheticScript {
            events: Vec::new(),
            oracle_operations: scripts.iter().flat_map(|s| s.oracle_operations.clone()).collect(),
        };
        return Ok(Box::new(OracleManagerPolicy::new(&merged)));
    }
    Ok(Box::new(match params {
        Some(path) => load_operation_params(path).map_err(runtime)?,
        None => OperationPolicyParameters::zeros(),
    }))
}

fn answer_policy_for(
    params: Option<&Path>,
    oracle: bool,
) -> Result<Box<dyn AnswerPolicy>, CliError> {
    if oracle {
        return Ok(Box::new(OracleAnswerPolicy));
    }
    Ok(Box::new(match params {
        Some(path) => load_answer_params(path).map_err(runtime)?,
        None => AnswerPolicyParameters::baseline(AnswerRule::ValueField),
    }))
}

pub fn run(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders help/version through the same path; honor its
            // exit code (0 for help, 2 for usage errors).
            let _ = e.print();
            return e.exit_code();
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .try_init();

    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let file = FileConfig::load(cli.common.config.as_deref())?;
    match cli.command {
        Command::SynthData {
            dialogues,
            sessions,
            facts,
            revision_rate,
            contradiction_rate,
            distractor_rate,
        } => {
            let mut run = Run::prepare(&cli.common, "synth-data")?;
            let defaults = SyntheticConfig::default();
            let base = SyntheticConfig {
                seed: run.seed,
                n_sessions: sessions,
                n_facts: facts,
                revision_rate: revision_rate
                    .or_else(|| file.f64("revision_rate"))
                    .unwrap_or(defaults.revision_rate),
                contradiction_rate: contradiction_rate
                    .or_else(|| file.f64("contradiction_rate"))
                    .unwrap_or(defaults.contradiction_rate),
                distractor_rate: distractor_rate
                    .or_else(|| file.f64("distractor_rate"))
                    .unwrap_or(defaults.distractor_rate),
            };
            if !(0.0..=1.0).contains(&base.revision_rate)
                || !(0.0..=1.0).contains(&base.contradiction_rate)
                || base.revision_rate + base.contradiction_rate > 1.0
            {
                return Err(CliError::Config(
                    "revision/contradiction rates must lie in [0,1] and sum to at most 1".into(),
                ));
            }
            let mut all_dialogues = Vec::with_capacity(dialogues);
            let mut all_scripts = Vec::with_capacity(dialogues);
            for i in 0..dialogues {
                let corpus =
                    generate_synthetic(&SyntheticConfig { seed: base.seed + i as u64, ..base });
                all_dialogues.push(corpus.dialogue);
                all_scripts.push(corpus.script);
            }
            let corpus_path = run.run_dir.join("corpus.json");
            save_corpus(&all_dialogues, &corpus_path).map_err(runtime)?;
            let sidecar_path = run.run_dir.join("corpus.oracle.json");
            let sidecar = serde_json::to_string_pretty(&all_scripts).map_err(runtime)?;
            std::fs::write(&sidecar_path, sidecar + "\n").map_err(runtime)?;
            run.record("dialogues".into(), serde_json::json!(dialogues));
            run.record("synthetic_config".into(), serde_json::to_value(&base).map_err(runtime)?);
            run.record_input_hash("corpus", &corpus_path)?;
            run.finish()
        }

        Command::BuildBank { corpus, dialogue_id, manager_params, oracle } => {
            let mut run = Run::prepare(&cli.common, "build-bank")?;
            run.record_input_hash("corpus", &corpus)?;
            let (dialogues, scripts) = load_corpus_with_sidecar(&corpus)?;
            let index = match &dialogue_id {
                Some(id) => dialogues
                    .iter()
                    .position(|d| &d.dialogue_id == id)
                    .ok_or_else(|| CliError::Config(format!("dialogue {id:?} not found")))?,
                None => 0,
            };
            let dialogue = dialogues
                .get(index)
                .ok_or_else(|| CliError::Config("corpus has no dialogues".into()))?;
            let scripts_slice = scripts.as_deref().map(|s| &s[index..index + 1]);
            let manager =
                manager_policy_for(manager_params.as_deref(), oracle, scripts_slice)?;
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(run.seed);
            let (bank, trace) = construct_memory_bank(
                dialogue,
                manager.as_ref(),
                &RuleExtractor,
                0.0,
                crate::retrieval::DEFAULT_MANAGER_K,
                &mut rng,
            )
            .map_err(runtime)?;
            let bank_path = run.run_dir.join("bank.jsonl");
            save_bank_path(&bank, &bank_path).map_err(runtime)?;
            let mut log = crate::memory::OperationLog::new(
                std::io::BufWriter::new(std::fs::File::create(run.run_dir.join("oplog.jsonl")).map_err(runtime)?),
            );
            for record in &trace {
                log.append(&record.log).map_err(runtime)?;
            }
            run.record("dialogue_id", serde_json::json!(dialogue.dialogue_id));
            run.record("bank_entries", serde_json::json!(bank.len()));
            run.record("operations", serde_json::json!(trace.len()));
            run.finish()
        }

        Command::TrainManager {
            corpus,
            trainer,
            group_size,
            epsilon,
            beta,
            actor_lr,
            critic_lr,
            max_steps,
            checkpoint_every,
            answer_params,
            init_params,
        } => {
            let mut run = Run::prepare(&cli.common, "train-manager")?;
            run.record_input_hash("corpus", &corpus)?;
            let (kind, config) = trainer_config(
                &file, &trainer, group_size, epsilon, beta, actor_lr, critic_lr, max_steps,
                checkpoint_every, run.seed,
            )?;
            let (dialogues, _) = load_corpus_with_sidecar(&corpus)?;
            let episodes: Vec<ManagerEpisode> =
                dialogues.iter().map(ManagerEpisode::from_dialogue).collect();
            let actor = match init_params {
                Some(path) => load_operation_params(&path).map_err(runtime)?,
                None => OperationPolicyParameters::zeros(),
            };
            let frozen: AnswerPolicyParameters = match answer_params {
                Some(path) => load_answer_params(&path).map_err(runtime)?,
                None => AnswerPolicyParameters::baseline(AnswerRule::ValueField),
            };
            let artifacts = train_memory_manager(
                &episodes,
                &actor,
                &frozen,
                &RuleExtractor,
                kind,
                &config,
                Some(&run.run_dir),
            )
            .map_err(runtime)?;
            let params_path = run.run_dir.join("manager.params");
            save_operation_params(&artifacts.params, &params_path).map_err(runtime)?;
            run.record("trainer", serde_json::json!(kind));
            run.record("trainer_config", serde_json::to_value(&config).map_err(runtime)?);
            run.record("episodes", serde_json::json!(episodes.len()));
            run.record(
                "final_mean_reward",
                serde_json::json!(artifacts.curve.last().map(|p| p.mean_reward)),
            );
            run.finish()
        }

        Command::TrainAnswer {
            corpus,
            trainer,
            group_size,
            epsilon,
            beta,
            actor_lr,
            critic_lr,
            max_steps,
            checkpoint_every,
            init_params,
            k_per_participant,
        } => {
            let mut run = Run::prepare(&cli.common, "train-answer")?;
            run.record_input_hash("corpus", &corpus)?;
            let (kind, config) = trainer_config(
                &file, &trainer, group_size, epsilon, beta, actor_lr, critic_lr, max_steps,
                checkpoint_every, run.seed,
            )?;
            let (dialogues, scripts) = load_corpus_with_sidecar(&corpus)?;
            let scripts = scripts.ok_or_else(|| {
                CliError::Config(
                    "train-answer needs the corpus oracle sidecar to build banks".into(),
                )
            })?;
            let mut tuples = Vec::new();
            for (dialogue, script) in dialogues.iter().zip(&scripts) {
                let bank = script.replay();
                tuples.extend(build_answer_tuples(dialogue, &bank, k_per_participant));
            }
            let actor = match init_params {
                Some(path) => load_answer_params(&path).map_err(runtime)?,
                None => AnswerPolicyParameters::zeros(AnswerRule::ValueField),
            };
            let artifacts =
                train_answer_agent(&tuples, &actor, kind, &config, Some(&run.run_dir))
                    .map_err(runtime)?;
            save_answer_params(&artifacts.params, &run.run_dir.join("answer.params"))
                .map_err(runtime)?;
            run.record("trainer", serde_json::json!(kind));
            run.record("trainer_config", serde_json::to_value(&config).map_err(runtime)?);
            run.record("tuples", serde_json::json!(tuples.len()));
            run.finish()
        }

        Command::Eval {
            corpus,
            manager_params,
            answer_params,
            oracle,
            runs,
            judge,
            test_split_only,
        } => {
            let mut run = Run::prepare(&cli.common, "eval")?;
            run.record_input_hash("corpus", &corpus)?;
            let (dialogues, scripts) = load_corpus_with_sidecar(&corpus)?;
            let slice: Vec<crate::dataset::Dialogue> = if test_split_only {
                let (_, _, test) = split_dataset(&dialogues)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                test.to_vec()
            } else {
                dialogues.clone()
            };
            let manager =
                manager_policy_for(manager_params.as_deref(), oracle, scripts.as_deref())?;
            let answer = answer_policy_for(answer_params.as_deref(), oracle)?;
            let gateway = if judge { Some(run.gateway()?) } else { None };
            let options = EvalOptions { runs, seed: run.seed, ..EvalOptions::default() };
            let (report, results) = evaluate(
                &slice,
                manager.as_ref(),
                answer.as_ref(),
                &RuleExtractor,
                gateway.as_deref(),
                &options,
            )
            .map_err(runtime)?;
            let rendered = format_report(&report);
            std::fs::write(run.run_dir.join("report.txt"), &rendered).map_err(runtime)?;
            let mut answers_out = String::new();
            for (dialogue, result) in slice.iter().zip(&results) {
                for ((question, prediction), (qa, reward)) in
                    result.answers.iter().zip(dialogue.qa.iter().zip(&result.rewards))
                {
                    answers_out.push_str(
                        &serde_json::to_string(&serde_json::json!({
                            "dialogue_id": dialogue.dialogue_id,
                            "question": question,
                            "gold_answer": qa.gold_answer,
                            "prediction": prediction,
                            "category": qa.category,
                            "em": reward,
                        }))
                        .map_err(runtime)?,
                    );
                    answers_out.push('\n');
                }
            }
            std::fs::write(run.run_dir.join("answers.jsonl"), answers_out).map_err(runtime)?;
            print!("{rendered}");
            run.record("dialogues_evaluated", serde_json::json!(slice.len()));
            run.record("runs", serde_json::json!(runs));
            run.record("overall_f1", serde_json::json!(report.overall.f1));
            run.finish()
        }

        Command::Judge { answers } => {
            let mut run = Run::prepare(&cli.common, "judge")?;
            run.record_input_hash("answers", &answers)?;
            let gateway = run.gateway()?;
            let text = std::fs::read_to_string(&answers).map_err(runtime)?;
            let mut scores = Vec::new();
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                let record: serde_json::Value = serde_json::from_str(line)
                    .map_err(|e| CliError::Runtime(format!("bad answers line: {e}")))?;
                let question = record["question"].as_str().unwrap_or_default().to_string();
                let gold = record["gold_answer"].as_str().unwrap_or_default().to_string();
                let pred = record["prediction"].as_str().unwrap_or_default().to_string();
                let category: crate::dataset::QuestionCategory =
                    serde_json::from_value(record["category"].clone())
                        .unwrap_or(crate::dataset::QuestionCategory::SingleHop);
                let label = match llm_judge(&question, &gold, &pred, gateway.as_ref()) {
                    Ok(label) => label,
                    Err(crate::metrics::MetricsError::JudgeUnavailable(e)) => {
                        log::warn!("judge unavailable: {e}");
                        JudgeLabel::Unavailable
                    }
                    Err(e) => return Err(runtime(e)),
                };
                scores.push((
                    category,
                    ScoreTriple {
                        f1: token_f1(&pred, &gold),
                        bleu1: bleu1(&pred, &gold),
                        judge: Some(label),
                    },
                ));
            }
            let report = aggregate_report(&scores, run.seed).map_err(runtime)?;
            let rendered = format_report(&report);
            std::fs::write(run.run_dir.join("report.txt"), &rendered).map_err(runtime)?;
            print!("{rendered}");
            run.record("questions_judged", serde_json::json!(scores.len()));
            run.finish()
        }
    }
}
