//! Command-line entry point: action-codec utilities, dataset generation,
//! the two-stage trainer, the hierarchical policy runtime, and the
//! experiment runners.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use deskvla::bench::eval::{eval_scene_for, EpisodeLog, TrialRecord};
use deskvla::bench::plan::{ExperimentPlan, PlanKind};
use deskvla::bench::run::run_plan;
use deskvla::codec::{
    fit_normalizer, pad_actions, train_fast_vocab, unpad_actions, ActionChunk, NormStats,
    VocabTrainConfig,
};
use deskvla::model::checkpoint;
use deskvla::model::config::ModelConfig;
use deskvla::policy::act::{act_loop, PolicyState};
use deskvla::policy::decode::DecodeConfig;
use deskvla::policy::strategy::HlProvider;
use deskvla::seeding::child_seed;
use deskvla::text::TextVocab;
use deskvla::trainer::mixture::{
    fit_codec, prepare_sets, record_chunk, CodecArtifacts, MixtureConfig, Stage,
};
use deskvla::trainer::stage::run_stage;
use deskvla::world::dataset::{
    generate_dataset, read_jsonl, write_jsonl, write_manifest, GenConfig, Manifest, Record,
    DATASET_VERSION,
};
use deskvla::world::expert::Task;

#[derive(Parser)]
#[command(name = "deskvla", version, about = "Desk-scale vision-language-action stack")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Action-codec utilities: normalizers, the discrete vocabulary, and
    /// round-trip error reports.
    #[command(subcommand)]
    Codec(CodecCmd),
    /// Generate a synthetic training dataset.
    #[command(subcommand)]
    World(WorldCmd),
    /// Run one training stage from a declarative config file.
    #[command(subcommand)]
    Train(TrainCmd),
    /// Run the trained policy in the simulator.
    #[command(subcommand)]
    Policy(PolicyCmd),
    /// Run a full experiment plan and write its report.
    #[command(subcommand)]
    Bench(BenchCmd),
}

#[derive(Subcommand)]
enum CodecCmd {
    /// Fit per-embodiment normalization statistics from a dataset.
    Fit(CodecData),
    /// Train the discrete action vocabulary from a dataset.
    TrainVocab(CodecData),
    /// Encode and decode every action chunk, reporting the max/mean
    /// reconstruction error per embodiment corpus.
    RoundtripReport {
        /// Dataset JSON-lines file.
        #[arg(long)]
        data: PathBuf,
        /// Codec artifacts JSON (as written next to a pre-training
        /// checkpoint); fitted from the data when omitted.
        #[arg(long)]
        artifacts: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CodecData {
    /// Dataset JSON-lines file.
    #[arg(long)]
    data: PathBuf,
    /// Output JSON path.
    #[arg(long)]
    out: PathBuf,
    /// Native action dimensions are padded to this count before encoding.
    #[arg(long, default_value_t = 7)]
    d_max: usize,
}

#[derive(Subcommand)]
enum WorldCmd {
    /// Generate records and a manifest into a directory.
    Gen {
        /// Number of training environments (ids 0..N).
        #[arg(long, default_value_t = 16)]
        envs: usize,
        /// Expert episodes per environment and task.
        #[arg(long, default_value_t = 2)]
        episodes_per_env: usize,
        /// Comma-separated data categories to keep (default: all).
        #[arg(long, value_delimiter = ',')]
        categories: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Lab pick-and-place episode count.
        #[arg(long, default_value_t = 96)]
        lab_count: usize,
        /// Web-style example count.
        #[arg(long, default_value_t = 900)]
        web_count: usize,
        /// Perturbed instruction-following rollout count.
        #[arg(long, default_value_t = 24)]
        vi_rollouts: usize,
        #[arg(long, default_value_t = 0.25)]
        vi_noise: f64,
        /// Output directory (records.jsonl + manifest.json).
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum TrainCmd {
    /// Stage 1: train the backbone on the discrete mixture.
    Pretrain {
        /// Declarative TOML config (stage, preset, seed, steps, weights,
        /// data).
        #[arg(long)]
        config: PathBuf,
        /// Checkpoint output path; a codec JSON sidecar is written next to
        /// it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Stage 2: attach the action expert and train on the robot mixture.
    Posttrain {
        #[arg(long)]
        config: PathBuf,
        /// Stage-1 checkpoint to start from (its codec sidecar must exist).
        #[arg(long)]
        init: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum PolicyCmd {
    /// Roll out the policy on simulated scenes and score it.
    Run {
        /// Post-trained checkpoint (codec sidecar must exist, or pass
        /// --codec).
        #[arg(long)]
        ckpt: PathBuf,
        /// Codec artifacts JSON; defaults to the checkpoint's sidecar.
        #[arg(long)]
        codec: Option<PathBuf>,
        /// Task name: dishes | items | laundry | bed |
        /// fetch:<category>:<receptacle>.
        #[arg(long)]
        task: String,
        /// Subtask source. "none" behaves like "implicit" at run time; pair
        /// it with a checkpoint trained without subtask supervision.
        #[arg(long, default_value = "model", value_parser = ["model", "implicit", "none", "oracle", "external"])]
        hl: String,
        /// Fixed label for --hl external.
        #[arg(long)]
        hl_label: Option<String>,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Environment id to sample scenes from.
        #[arg(long, default_value_t = 16)]
        env: u64,
        /// Episode step cap (default: the embodiment's limit).
        #[arg(long)]
        step_limit: Option<usize>,
        /// Episode log output (JSON lines).
        #[arg(long, default_value = "episodes.jsonl")]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum BenchCmd {
    /// Held-out performance vs. number of training environments.
    EnvScaling(BenchArgs),
    /// Leave-one-out co-training mixtures.
    AblateMixture(BenchArgs),
    /// Subtask-inference strategies over shared checkpoints.
    AblateHl(BenchArgs),
    /// Language-following rates vs. the random-selection floor.
    LangFollow(BenchArgs),
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment plan (TOML).
    #[arg(long)]
    plan: PathBuf,
    /// Report output directory.
    #[arg(long)]
    out: PathBuf,
    /// Model preset: desk | tiny.
    #[arg(long, default_value = "desk")]
    preset: String,
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Codec(c) => codec_cmd(c),
        Cmd::World(w) => world_cmd(w),
        Cmd::Train(t) => train_cmd(t),
        Cmd::Policy(p) => policy_cmd(p),
        Cmd::Bench(b) => bench_cmd(b),
    }
}

fn model_preset(name: &str) -> Result<ModelConfig> {
    match name {
        "desk" => Ok(ModelConfig::desk()),
        "tiny" => {
            let mut cfg = ModelConfig::desk();
            cfg.width = 16;
            cfg.depth = 1;
            cfg.heads = 2;
            cfg.head_dim = 8;
            cfg.mlp_dim = 32;
            cfg.expert_width = 16;
            cfg.expert_mlp_dim = 32;
            cfg.timestep_width = 8;
            cfg.denoise_steps = 2;
            Ok(cfg)
        }
        other => bail!("unknown model preset {other} (expected desk or tiny)"),
    }
}

/// Group the action-bearing records of a dataset by embodiment.
fn chunks_by_embodiment(records: &[Record]) -> Result<BTreeMap<String, Vec<ActionChunk>>> {
    let mut by_emb: BTreeMap<String, Vec<ActionChunk>> = BTreeMap::new();
    for r in records {
        if r.has_actions() {
            by_emb.entry(r.embodiment.clone()).or_default().push(record_chunk(r)?);
        }
    }
    if by_emb.is_empty() {
        bail!("dataset contains no action records");
    }
    Ok(by_emb)
}

fn codec_cmd(cmd: CodecCmd) -> Result<()> {
    match cmd {
        CodecCmd::Fit(a) => {
            let records = read_jsonl(&a.data)?;
            let mut norms: BTreeMap<String, NormStats> = BTreeMap::new();
            for (emb, chunks) in chunks_by_embodiment(&records)? {
                let stats = fit_normalizer(&chunks)?;
                println!("{emb}: {} chunks, {} dims", chunks.len(), stats.dim());
                norms.insert(emb, stats);
            }
            std::fs::write(&a.out, serde_json::to_string_pretty(&norms)?)?;
            println!("wrote {}", a.out.display());
        }
        CodecCmd::TrainVocab(a) => {
            let records = read_jsonl(&a.data)?;
            let mut corpus = Vec::new();
            for (_, chunks) in chunks_by_embodiment(&records)? {
                let stats = fit_normalizer(&chunks)?;
                for c in &chunks {
                    corpus.push(pad_actions(&stats.normalize(c)?, a.d_max)?);
                }
            }
            let vocab = train_fast_vocab(&corpus, VocabTrainConfig::default())?;
            std::fs::write(&a.out, vocab.to_json())?;
            println!(
                "trained {} token ids from {} chunks; wrote {}",
                vocab.token_count(),
                corpus.len(),
                a.out.display()
            );
        }
        CodecCmd::RoundtripReport { data, artifacts } => {
            let records = read_jsonl(&data)?;
            let arts = match artifacts {
                Some(p) => CodecArtifacts::from_json(
                    &std::fs::read_to_string(&p)
                        .with_context(|| format!("reading {}", p.display()))?,
                )?,
                None => fit_codec(&records, 7, usize::MAX)?,
            };
            println!("corpus,chunks,tokens_per_chunk,max_err,mean_err");
            for (emb, chunks) in chunks_by_embodiment(&records)? {
                let stats = arts
                    .norms
                    .get(&emb)
                    .with_context(|| format!("artifacts lack normalizer for {emb}"))?;
                let d_max = arts.fast.dim;
                let (mut max_err, mut sum_err, mut n_vals, mut n_toks) = (0.0f64, 0.0, 0usize, 0);
                for c in &chunks {
                    let padded = pad_actions(&stats.normalize(c)?, d_max)?;
                    let toks = deskvla::codec::encode_fast(&arts.fast, &padded)?;
                    n_toks += toks.len();
                    // The decoder reconstructs at the padded width; restore
                    // the corpus's native dimension before denormalizing.
                    let mut dec = deskvla::codec::decode_fast(&arts.fast, &toks)?;
                    dec.padded_from = padded.padded_from;
                    let rec = stats.denormalize(&unpad_actions(&dec))?;
                    for (a, b) in c.values.iter().zip(&rec.values) {
                        let e = (a - b).abs();
                        max_err = max_err.max(e);
                        sum_err += e;
                        n_vals += 1;
                    }
                }
                println!(
                    "{emb},{},{:.2},{:.6},{:.6}",
                    chunks.len(),
                    n_toks as f64 / chunks.len() as f64,
                    max_err,
                    sum_err / n_vals as f64
                );
            }
        }
    }
    Ok(())
}

fn world_cmd(cmd: WorldCmd) -> Result<()> {
    let WorldCmd::Gen {
        envs,
        episodes_per_env,
        categories,
        seed,
        lab_count,
        web_count,
        vi_rollouts,
        vi_noise,
        out,
    } = cmd;
    let cfg = GenConfig {
        seed,
        envs: (0..envs as u64).collect(),
        mm_seeds_per_task: episodes_per_env,
        me_seeds_per_task: episodes_per_env,
        lab_count,
        web_count,
        vi_rollouts,
        vi_noise,
    };
    let (mut records, mut manifest) = generate_dataset(&cfg)?;
    if !categories.is_empty() {
        records.retain(|r| categories.iter().any(|c| c == &r.category));
        let mut env_ids: Vec<u64> = records.iter().map(|r| r.env_id).collect();
        env_ids.sort_unstable();
        env_ids.dedup();
        let mut counts = BTreeMap::new();
        for r in &records {
            *counts.entry(r.category.clone()).or_insert(0) += 1;
        }
        manifest = Manifest { version: DATASET_VERSION, seed, env_ids, counts, config: cfg };
    }
    std::fs::create_dir_all(&out)?;
    write_jsonl(&out.join("records.jsonl"), &records)?;
    write_manifest(&out.join("manifest.json"), &manifest)?;
    for (cat, n) in &manifest.counts {
        println!("{cat}: {n} records");
    }
    println!("wrote {} records to {}", records.len(), out.display());
    Ok(())
}

/// Declarative training config: stage, model preset, seeds, step budget,
/// mixture-weight overrides, and the data-generation block.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainFile {
    stage: String,
    #[serde(default = "default_preset")]
    preset: String,
    #[serde(default)]
    seed: u64,
    steps: Option<usize>,
    batch_size: Option<usize>,
    /// Flow-loss coefficient override.
    alpha: Option<f64>,
    /// Sampling-weight overrides merged onto the stage defaults (set a
    /// category to 0 to ablate it).
    #[serde(default)]
    weights: BTreeMap<String, f64>,
    #[serde(default)]
    data: DataSection,
}

fn default_preset() -> String {
    "desk".to_string()
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct DataSection {
    seed: Option<u64>,
    envs: Option<Vec<u64>>,
    mm_seeds_per_task: Option<usize>,
    me_seeds_per_task: Option<usize>,
    lab_count: Option<usize>,
    web_count: Option<usize>,
    vi_rollouts: Option<usize>,
    vi_noise: Option<f64>,
}

impl TrainFile {
    fn load(path: &Path) -> Result<TrainFile> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        Ok(toml::from_str(&text)?)
    }

    fn gen_config(&self) -> GenConfig {
        let d = &self.data;
        GenConfig {
            seed: d.seed.unwrap_or(self.seed),
            envs: d.envs.clone().unwrap_or_else(|| (0..16).collect()),
            mm_seeds_per_task: d.mm_seeds_per_task.unwrap_or(2),
            me_seeds_per_task: d.me_seeds_per_task.unwrap_or(2),
            lab_count: d.lab_count.unwrap_or(96),
            web_count: d.web_count.unwrap_or(900),
            vi_rollouts: d.vi_rollouts.unwrap_or(24),
            vi_noise: d.vi_noise.unwrap_or(0.25),
        }
    }

    fn mixture(&self, stage: Stage) -> MixtureConfig {
        let mut mix = match stage {
            Stage::Pretrain => MixtureConfig::pretrain_default(self.seed),
            Stage::Posttrain => MixtureConfig::posttrain_default(self.seed),
        };
        if let Some(s) = self.steps {
            mix.steps = s;
        }
        if let Some(b) = self.batch_size {
            mix.batch_size = b;
        }
        if let Some(a) = self.alpha {
            mix.alpha = a;
        }
        for (k, v) in &self.weights {
            mix.weights.insert(k.clone(), *v);
        }
        mix
    }
}

fn codec_sidecar(ckpt: &Path) -> PathBuf {
    ckpt.with_extension("codec.json")
}

fn train_cmd(cmd: TrainCmd) -> Result<()> {
    let vocab = TextVocab::new();
    match cmd {
        TrainCmd::Pretrain { config, out } => {
            let file = TrainFile::load(&config)?;
            if file.stage != "pretrain" {
                bail!("config stage is {:?}, expected \"pretrain\"", file.stage);
            }
            let cfg = model_preset(&file.preset)?;
            let mix = file.mixture(Stage::Pretrain);
            let (records, manifest) = generate_dataset(&file.gen_config())?;
            println!("dataset: {:?}", manifest.counts);
            let artifacts = fit_codec(&records, cfg.d_max, cfg.fast_tokens)?;
            let sets = prepare_sets(&records, Stage::Pretrain, mix.ep_len_quantile, artifacts.clone());
            let mut model = deskvla::model::forward::TwoExpertModel::new_backbone(
                cfg.clone(),
                vocab.vocab_size_with(cfg.fast_tokens),
            )?;
            let (report, _) = run_stage(&mut model, &sets, &mix, &vocab)?;
            if let Some(parent) = out.parent() {
                std::fs::create_dir_all(parent)?;
            }
            checkpoint::save(&model, &out)?;
            std::fs::write(codec_sidecar(&out), artifacts.to_json())?;
            report.write_csv(&out.with_extension("train.csv"))?;
            println!(
                "final ce {:.4}; wrote {} (+ codec.json, train.csv sidecars)",
                report.final_ce().unwrap_or(f64::NAN),
                out.display()
            );
        }
        TrainCmd::Posttrain { config, init, out } => {
            let file = TrainFile::load(&config)?;
            if file.stage != "posttrain" {
                bail!("config stage is {:?}, expected \"posttrain\"", file.stage);
            }
            let cfg = model_preset(&file.preset)?;
            let mix = file.mixture(Stage::Posttrain);
            let artifacts = CodecArtifacts::from_json(
                &std::fs::read_to_string(codec_sidecar(&init)).with_context(|| {
                    format!("reading codec sidecar of {}", init.display())
                })?,
            )?;
            let (records, manifest) = generate_dataset(&file.gen_config())?;
            println!("dataset: {:?}", manifest.counts);
            let sets =
                prepare_sets(&records, Stage::Posttrain, mix.ep_len_quantile, artifacts.clone());
            let mut model = checkpoint::load_expect(&init, &cfg)?;
            let (report, _) = run_stage(&mut model, &sets, &mix, &vocab)?;
            if let Some(parent) = out.parent() {
                std::fs::create_dir_all(parent)?;
            }
            checkpoint::save(&model, &out)?;
            std::fs::write(codec_sidecar(&out), artifacts.to_json())?;
            report.write_csv(&out.with_extension("train.csv"))?;
            println!(
                "final ce {:.4}, flow {:.4}; wrote {}",
                report.metrics.last().map(|m| m.ce_loss).unwrap_or(f64::NAN),
                report.metrics.last().map(|m| m.flow_loss).unwrap_or(f64::NAN),
                out.display()
            );
        }
    }
    Ok(())
}

fn policy_cmd(cmd: PolicyCmd) -> Result<()> {
    let PolicyCmd::Run {
        ckpt,
        codec,
        task,
        hl,
        hl_label,
        episodes,
        seed,
        env,
        step_limit,
        out,
    } = cmd;
    let model = checkpoint::load(&ckpt)?;
    let codec_path = codec.unwrap_or_else(|| codec_sidecar(&ckpt));
    let artifacts = CodecArtifacts::from_json(
        &std::fs::read_to_string(&codec_path)
            .with_context(|| format!("reading {}", codec_path.display()))?,
    )?;
    let vocab = TextVocab::new();
    let task = Task::parse(&task)?;
    let provider = match hl.as_str() {
        "model" => HlProvider::Model { model: &model, decode: DecodeConfig::default() },
        "implicit" | "none" => HlProvider::Implicit,
        "oracle" => HlProvider::Oracle,
        "external" => HlProvider::External {
            label: hl_label.context("--hl external requires --hl-label")?,
        },
        other => bail!("unknown subtask source {other}"),
    };

    let mut logs = Vec::new();
    let (mut score_sum, mut successes) = (0.0, 0usize);
    for e in 0..episodes {
        let scene = eval_scene_for(&task, env, child_seed(seed, &[0x5ce, e as u64]))?;
        let mut st = PolicyState::new(&task.prompt(), child_seed(seed, &[0xac7, e as u64]));
        st.step_limit = step_limit;
        st.denoise_steps = model.config.denoise_steps;
        let (ep, stats) = act_loop(&model, &vocab, &artifacts, &scene, &task, &provider, &st)?;
        score_sum += ep.score;
        successes += ep.success as usize;
        println!(
            "episode {e}: steps {}, chunks {}, rubric {:.3}, success {}",
            ep.steps.len(),
            stats.chunks,
            ep.score,
            ep.success
        );
        let rec = TrialRecord {
            cell: "policy_run".to_string(),
            task: ep.task.name(),
            env_id: env,
            score: ep.score,
            success: ep.success,
            following: None,
        };
        logs.push(EpisodeLog::from_episode(&rec, &ep));
    }
    deskvla::bench::eval::write_episode_logs(&out, &logs)?;
    println!(
        "rubric mean {:.3}, success rate {:.3} over {episodes} episodes; log at {}",
        score_sum / episodes.max(1) as f64,
        successes as f64 / episodes.max(1) as f64,
        out.display()
    );
    Ok(())
}

fn bench_cmd(cmd: BenchCmd) -> Result<()> {
    let (args, kind) = match &cmd {
        BenchCmd::EnvScaling(a) => (a, PlanKind::EnvScaling),
        BenchCmd::AblateMixture(a) => (a, PlanKind::MixtureAblation),
        BenchCmd::AblateHl(a) => (a, PlanKind::HlAblation),
        BenchCmd::LangFollow(a) => (a, PlanKind::LanguageFollowing),
    };
    let plan = ExperimentPlan::load(&args.plan)?;
    if plan.kind != kind {
        bail!("plan kind is {}, but the subcommand expects {}", plan.kind.name(), kind.name());
    }
    let cfg = model_preset(&args.preset)?;
    let report = run_plan(&plan, &cfg, &args.out)?;
    for c in report.cells.iter().filter(|c| c.task == "all") {
        println!(
            "{}: rubric {:.3} over {} trials{}",
            c.cell,
            c.rubric_mean,
            c.trials,
            c.following_rate.map(|f| format!(", following {f:.3}")).unwrap_or_default()
        );
    }
    for s in &report.significance {
        println!(
            "{} vs {}: p = {:.4}{}",
            s.cell,
            s.reference,
            s.p,
            if s.significant { " (significant)" } else { "" }
        );
    }
    println!("report written to {}", args.out.display());
    Ok(())
}
