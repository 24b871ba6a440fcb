//! Study runners. Each plan kind trains the checkpoints it needs and
//! evaluates them into a [`BenchReport`] on disk.
//!
//! Checkpoints are cached under `<out>/checkpoints/` keyed by a hash of the
//! model configuration, the data-generation configuration, and the full
//! mixture recipe, so repeated or overlapping runs retrain nothing. Every
//! trained model crosses a serialize/deserialize boundary before evaluation,
//! which keeps cached and freshly trained paths bit-identical.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::bench::eval::{
    lang_trials, random_choice_trials, rubric_trials, summarize_cell, write_episode_logs,
    EvalParams, EvalSetup, ProviderSpec,
};
use crate::bench::plan::{fnv1a64, ExperimentPlan, PlanKind};
use crate::bench::report::BenchReport;
use crate::model::checkpoint;
use crate::model::config::ModelConfig;
use crate::model::forward::TwoExpertModel;
use crate::policy::strategy::most_frequent_subtask;
use crate::seeding::child_seed;
use crate::text::TextVocab;
use crate::trainer::mixture::{
    fit_codec, prepare_sets, truncate_pools, CodecArtifacts, MixtureConfig, Stage,
};
use crate::trainer::stage::run_stage;
use crate::world::dataset::{check_env_isolation, generate_dataset, GenConfig};
use crate::{Error, Result};

/// A trained checkpoint on disk plus the frozen codec it was trained with.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub ckpt: PathBuf,
    pub artifacts: CodecArtifacts,
}

/// Categories whose sampling weight each named ablation zeroes, per stage.
/// Returns `(pre_training, post_training)` category lists.
pub fn ablation_zeroed(name: &str) -> Result<(&'static [&'static str], &'static [&'static str])> {
    match name {
        "full" => Ok((&[], &[])),
        "no_wd" => Ok((&["WD"], &["WD"])),
        "no_me" => Ok((&["ME"], &["ME"])),
        // Cross-embodiment data only exists in the pre-training mixture.
        "no_ce" => Ok((&["CE"], &[])),
        "no_me_or_ce" => Ok((&["ME", "CE"], &["ME"])),
        "no_hl" => Ok((&["HL"], &["HL"])),
        // Verbal-instruction data only exists in the post-training mixture.
        "no_vi" => Ok((&[], &["VI"])),
        other => Err(Error::InvalidConfig(format!("unknown ablation {other}"))),
    }
}

fn zero_weights(mix: &mut MixtureConfig, cats: &[&str]) {
    for c in cats {
        if let Some(w) = mix.weights.get_mut(*c) {
            *w = 0.0;
        }
    }
}

/// Restrict a mixture to robot demonstrations only (the from-scratch
/// baseline recipe: no co-training pools at either stage).
fn mm_only(mix: &MixtureConfig) -> MixtureConfig {
    let mut m = mix.clone();
    m.weights = BTreeMap::from([("MM".to_string(), 1.0)]);
    m
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Shared state for one runner invocation: the validated plan, the model
/// shape, the output directory, and the text vocabulary.
struct Ctx<'a> {
    plan: &'a ExperimentPlan,
    cfg: &'a ModelConfig,
    out: PathBuf,
    vocab: TextVocab,
}

impl<'a> Ctx<'a> {
    fn new(plan: &'a ExperimentPlan, cfg: &'a ModelConfig, out: &Path, expect: PlanKind) -> Result<Self> {
        plan.validate()?;
        if plan.kind != expect {
            return Err(Error::InvalidConfig(format!(
                "plan kind {} given to the {} runner",
                plan.kind.name(),
                expect.name()
            )));
        }
        let out = out.to_path_buf();
        std::fs::create_dir_all(out.join("checkpoints"))?;
        std::fs::create_dir_all(out.join("episodes"))?;
        std::fs::write(out.join("plan.toml"), plan.to_toml_string())?;
        Ok(Ctx { plan, cfg, out, vocab: TextVocab::new() })
    }

    fn report(&self) -> BenchReport {
        let hash =
            fnv1a64(format!("{}|{}", self.plan.config_hash(), self.cfg.hash()).as_bytes());
        BenchReport::new(self.plan.kind.name(), self.plan.seed, &format!("{hash:016x}"))
    }

    /// Pre-training recipe scaled to the plan's step/batch budget.
    fn pre_mix(&self) -> MixtureConfig {
        let mut m = MixtureConfig::pretrain_default(self.plan.seed);
        m.steps = self.plan.pretrain_steps;
        m.batch_size = self.plan.batch_size;
        m
    }

    /// Post-training recipe; seeded independently of pre-training.
    fn post_mix(&self) -> MixtureConfig {
        let mut m = MixtureConfig::posttrain_default(child_seed(self.plan.seed, &[0xbe9c]));
        m.steps = self.plan.posttrain_steps;
        m.batch_size = self.plan.batch_size;
        m
    }

    /// Cache path for a training product: `{tag}-{hash}.ckpt`.
    fn ckpt_file(&self, tag: &str, key_parts: &[&str]) -> PathBuf {
        let mut key = self.cfg.hash();
        for p in key_parts {
            key.push('|');
            key.push_str(p);
        }
        let h = fnv1a64(key.as_bytes());
        self.out.join("checkpoints").join(format!("{tag}-{h:016x}.ckpt"))
    }

    fn codec_path(ckpt: &Path) -> PathBuf {
        ckpt.with_extension("codec.json")
    }

    /// Train a backbone from scratch on the pre-training mixture, fitting
    /// the codec (normalizers + action-token vocabulary) from the same data.
    fn pretrain(
        &self,
        tag: &str,
        gen: &GenConfig,
        mix: &MixtureConfig,
        isolate_from: Option<&[u64]>,
    ) -> Result<TrainedModel> {
        let gen_key = serde_json::to_string(gen)?;
        let mix_key = format!("{mix:?}");
        let ckpt = self.ckpt_file(tag, &["pretrain", &gen_key, &mix_key]);
        let codec = Self::codec_path(&ckpt);
        if ckpt.exists() && codec.exists() {
            let artifacts = CodecArtifacts::from_json(&std::fs::read_to_string(&codec)?)?;
            return Ok(TrainedModel { ckpt, artifacts });
        }
        let (records, _) = generate_dataset(gen)?;
        if let Some(held) = isolate_from {
            check_env_isolation(&records, held)?;
        }
        let artifacts = fit_codec(&records, self.cfg.d_max, self.cfg.fast_tokens)?;
        let sets = prepare_sets(&records, Stage::Pretrain, mix.ep_len_quantile, artifacts.clone());
        let mut model = TwoExpertModel::new_backbone(
            self.cfg.clone(),
            self.vocab.vocab_size_with(self.cfg.fast_tokens),
        )?;
        let (report, _) = run_stage(&mut model, &sets, mix, &self.vocab)?;
        checkpoint::save(&model, &ckpt)?;
        std::fs::write(&codec, artifacts.to_json())?;
        report.write_csv(&ckpt.with_extension("train.csv"))?;
        Ok(TrainedModel { ckpt, artifacts })
    }

    /// Attach the action expert and run the post-training mixture, starting
    /// from `init` (loaded back from disk, never from memory). When `caps`
    /// is given, every capped pool must land exactly on its cap, which is
    /// how experiment cells guarantee equal unique-sample counts.
    fn posttrain(
        &self,
        tag: &str,
        init: &TrainedModel,
        gen: &GenConfig,
        mix: &MixtureConfig,
        caps: Option<&BTreeMap<String, usize>>,
        isolate_from: Option<&[u64]>,
    ) -> Result<TrainedModel> {
        let gen_key = serde_json::to_string(gen)?;
        let mix_key = format!("{mix:?}");
        let init_key = file_name(&init.ckpt);
        let caps_key = format!("{caps:?}");
        let ckpt = self.ckpt_file(tag, &["posttrain", &init_key, &gen_key, &mix_key, &caps_key]);
        if ckpt.exists() {
            return Ok(TrainedModel { ckpt, artifacts: init.artifacts.clone() });
        }
        let (records, _) = generate_dataset(gen)?;
        if let Some(held) = isolate_from {
            check_env_isolation(&records, held)?;
        }
        let mut sets =
            prepare_sets(&records, Stage::Posttrain, mix.ep_len_quantile, init.artifacts.clone());
        if let Some(caps) = caps {
            truncate_pools(&mut sets, caps);
            for (cat, cap) in caps {
                let n = sets.pools.get(cat).map(Vec::len).unwrap_or(0);
                if n != *cap {
                    return Err(Error::InvalidConfig(format!(
                        "cell {tag}: pool {cat} has {n} records, expected {cap} after equalization"
                    )));
                }
            }
        }
        let mut model = checkpoint::load_expect(&init.ckpt, self.cfg)?;
        let (report, _) = run_stage(&mut model, &sets, mix, &self.vocab)?;
        checkpoint::save(&model, &ckpt)?;
        report.write_csv(&ckpt.with_extension("train.csv"))?;
        Ok(TrainedModel { ckpt, artifacts: init.artifacts.clone() })
    }

    /// Single-stage training of a fresh model directly on the post-training
    /// mixture (no discrete pre-training stage at all).
    fn scratch_single_stage(
        &self,
        tag: &str,
        gen: &GenConfig,
        mix: &MixtureConfig,
    ) -> Result<TrainedModel> {
        let gen_key = serde_json::to_string(gen)?;
        let mix_key = format!("{mix:?}");
        let ckpt = self.ckpt_file(tag, &["scratch-single", &gen_key, &mix_key]);
        let codec = Self::codec_path(&ckpt);
        if ckpt.exists() && codec.exists() {
            let artifacts = CodecArtifacts::from_json(&std::fs::read_to_string(&codec)?)?;
            return Ok(TrainedModel { ckpt, artifacts });
        }
        let (records, _) = generate_dataset(gen)?;
        let artifacts = fit_codec(&records, self.cfg.d_max, self.cfg.fast_tokens)?;
        let sets = prepare_sets(&records, Stage::Posttrain, mix.ep_len_quantile, artifacts.clone());
        let mut model = TwoExpertModel::new_backbone(
            self.cfg.clone(),
            self.vocab.vocab_size_with(self.cfg.fast_tokens),
        )?;
        let (report, _) = run_stage(&mut model, &sets, mix, &self.vocab)?;
        checkpoint::save(&model, &ckpt)?;
        std::fs::write(&codec, artifacts.to_json())?;
        report.write_csv(&ckpt.with_extension("train.csv"))?;
        Ok(TrainedModel { ckpt, artifacts })
    }

    /// The full two-stage recipe for a named mixture cell ("full" or one of
    /// the known ablations). Cells whose pre-training mixture is untouched
    /// share the "full-pre" checkpoint.
    fn recipe(&self, name: &str, gen: &GenConfig) -> Result<TrainedModel> {
        let (pre_z, post_z) = ablation_zeroed(name)?;
        let mut pre = self.pre_mix();
        zero_weights(&mut pre, pre_z);
        let mut post = self.post_mix();
        zero_weights(&mut post, post_z);
        let pre_tag =
            if pre_z.is_empty() { "full-pre".to_string() } else { format!("{name}-pre") };
        let base = self.pretrain(&pre_tag, gen, &pre, Some(&self.plan.heldout_envs))?;
        self.posttrain(name, &base, gen, &post, None, Some(&self.plan.heldout_envs))
    }

    /// Pool sizes a post-training cell would see, used to compute the
    /// per-category minimum across cells before any training happens.
    fn posttrain_pool_sizes(
        &self,
        gen: &GenConfig,
        artifacts: &CodecArtifacts,
        quantile: f64,
    ) -> Result<BTreeMap<String, usize>> {
        let (records, _) = generate_dataset(gen)?;
        let sets = prepare_sets(&records, Stage::Posttrain, quantile, artifacts.clone());
        Ok(sets.pools.iter().map(|(k, v)| (k.clone(), v.len())).collect())
    }

    /// Evaluation parameters shared by every cell in a report, so all cells
    /// face the same scene suite (paired trials).
    fn eval_params(&self, trials: usize, tag: u64) -> EvalParams {
        let mut p = EvalParams::new(trials, child_seed(self.plan.seed, &[0xeba1, tag]));
        p.step_limit = self.plan.eval_step_limit;
        p
    }

    /// Rubric evaluation of one cell on the held-out environments.
    fn eval_rubric_cell(
        &self,
        rep: &mut BenchReport,
        tm: &TrainedModel,
        spec: &ProviderSpec,
        cell: &str,
    ) -> Result<()> {
        let model = checkpoint::load_expect(&tm.ckpt, self.cfg)?;
        let setup = EvalSetup { model: &model, vocab: &self.vocab, artifacts: &tm.artifacts };
        let params = self.eval_params(self.plan.trials_per_task, 1);
        let (recs, logs) = rubric_trials(&setup, spec, cell, &self.plan.heldout_envs, &params)?;
        write_episode_logs(&self.out.join("episodes").join(format!("{cell}.jsonl")), &logs)?;
        for c in summarize_cell(cell, &recs) {
            rep.add_cell(c);
        }
        rep.note(format!("cell {cell}: checkpoint {}", file_name(&tm.ckpt)));
        Ok(())
    }

    /// Language-following evaluation (in-distribution and out-of-
    /// distribution object vocabularies) of one cell.
    fn eval_lang_cell(
        &self,
        rep: &mut BenchReport,
        tm: &TrainedModel,
        spec: &ProviderSpec,
        cell: &str,
    ) -> Result<()> {
        let model = checkpoint::load_expect(&tm.ckpt, self.cfg)?;
        let setup = EvalSetup { model: &model, vocab: &self.vocab, artifacts: &tm.artifacts };
        let params = self.eval_params(self.plan.lang_trials, 2);
        let mut recs = Vec::new();
        let mut logs = Vec::new();
        for ood in [false, true] {
            let (r, l) = lang_trials(&setup, spec, cell, &self.plan.heldout_envs, &params, ood)?;
            recs.extend(r);
            logs.extend(l);
        }
        write_episode_logs(&self.out.join("episodes").join(format!("{cell}.jsonl")), &logs)?;
        for c in summarize_cell(cell, &recs) {
            rep.add_cell(c);
        }
        rep.note(format!("cell {cell}: checkpoint {}", file_name(&tm.ckpt)));
        Ok(())
    }

    fn finish(&self, mut rep: BenchReport, reference: &str) -> Result<BenchReport> {
        rep.annotate_significance(reference);
        rep.write(&self.out)?;
        Ok(rep)
    }
}

/// Dispatch a plan to its runner.
pub fn run_plan(plan: &ExperimentPlan, cfg: &ModelConfig, out: &Path) -> Result<BenchReport> {
    match plan.kind {
        PlanKind::EnvScaling => run_env_scaling(plan, cfg, out),
        PlanKind::MixtureAblation => run_mixture_ablation(plan, cfg, out),
        PlanKind::ModelCompare => run_model_compare(plan, cfg, out),
        PlanKind::HlAblation => run_hl_ablation(plan, cfg, out),
        PlanKind::LanguageFollowing => run_language_following(plan, cfg, out),
    }
}

/// How held-out task performance scales with the number of distinct training
/// environments. One shared pre-trained base (robot-demonstration weight
/// zeroed, so no cell's target data leaks in) is post-trained once per grid
/// point on the first `k` environments, with demonstration counts equalized
/// across cells by seed multipliers plus exact truncation. With
/// `include_controls`, adds a cell post-trained directly on the held-out
/// environments and two from-scratch robot-data-only baselines.
pub fn run_env_scaling(
    plan: &ExperimentPlan,
    cfg: &ModelConfig,
    out: &Path,
) -> Result<BenchReport> {
    let ctx = Ctx::new(plan, cfg, out, PlanKind::EnvScaling)?;
    let mut rep = ctx.report();
    if plan.trials_per_task == 0 {
        rep.note("zero trials per task: nothing evaluated");
        rep.write(&ctx.out)?;
        return Ok(rep);
    }
    let max_k = *plan.env_grid.last().expect("validated non-empty grid");

    // Shared base: every cell starts from the same pre-trained backbone,
    // built on the full training-environment set minus the category the
    // cells themselves vary (robot demonstrations).
    let mut pre = ctx.pre_mix();
    zero_weights(&mut pre, &["MM"]);
    let gen_full = plan.gen_config(&plan.train_envs, 1, 1);
    let shared = ctx.pretrain("scaling-pre", &gen_full, &pre, Some(&plan.heldout_envs))?;

    let post = ctx.post_mix();
    let mut cells: Vec<(String, GenConfig)> = Vec::new();
    for &k in &plan.env_grid {
        let mult = max_k.div_ceil(k);
        let gen = plan.gen_config(&plan.train_envs[..k], mult, mult);
        cells.push((format!("envs_{k:02}"), gen));
    }
    // Equalize unique demonstration counts: cap every pool at the
    // per-category minimum across cells.
    let mut caps: BTreeMap<String, usize> = BTreeMap::new();
    for (_, gen) in &cells {
        for (cat, n) in ctx.posttrain_pool_sizes(gen, &shared.artifacts, post.ep_len_quantile)? {
            caps.entry(cat).and_modify(|c| *c = (*c).min(n)).or_insert(n);
        }
    }
    rep.note(format!("equalized post-training pool sizes: {caps:?}"));

    for (name, gen) in &cells {
        let tm = ctx.posttrain(name, &shared, gen, &post, Some(&caps), Some(&plan.heldout_envs))?;
        ctx.eval_rubric_cell(&mut rep, &tm, &ProviderSpec::Model, name)?;
    }

    if plan.include_controls {
        // Upper reference: same shared base, post-trained directly on the
        // held-out environments (pool sizes not equalized with the grid).
        let mult = max_k.div_ceil(plan.heldout_envs.len());
        let gen_held = plan.gen_config(&plan.heldout_envs, mult, mult);
        let tm = ctx.posttrain("control_heldout", &shared, &gen_held, &post, None, None)?;
        ctx.eval_rubric_cell(&mut rep, &tm, &ProviderSpec::Model, "control_heldout")?;
        rep.note("control_heldout: post-trained on the held-out environments themselves");

        // From-scratch baselines: robot demonstrations only, both stages,
        // no co-training pools.
        let mm_pre = mm_only(&ctx.pre_mix());
        let mm_post = mm_only(&ctx.post_mix());
        for (cell, gen) in [("scratch_heldout", &gen_held), ("scratch_train", &gen_full)] {
            let base = ctx.pretrain(&format!("{cell}-pre"), gen, &mm_pre, None)?;
            let tm = ctx.posttrain(cell, &base, gen, &mm_post, None, None)?;
            ctx.eval_rubric_cell(&mut rep, &tm, &ProviderSpec::Model, cell)?;
        }
        rep.note("scratch cells: robot demonstrations only, no co-training");
    }

    ctx.finish(rep, &format!("envs_{max_k:02}"))
}

/// Leave-one-out co-training mixtures: the full recipe against each named
/// ablation, scored on held-out rubric tasks and on language following.
pub fn run_mixture_ablation(
    plan: &ExperimentPlan,
    cfg: &ModelConfig,
    out: &Path,
) -> Result<BenchReport> {
    let ctx = Ctx::new(plan, cfg, out, PlanKind::MixtureAblation)?;
    let mut rep = ctx.report();
    if plan.trials_per_task == 0 && plan.lang_trials == 0 {
        rep.note("zero trials: nothing evaluated");
        rep.write(&ctx.out)?;
        return Ok(rep);
    }
    let gen = plan.gen_config(&plan.train_envs, 1, 1);
    let mut names = vec!["full".to_string()];
    names.extend(plan.ablations.iter().cloned());
    for name in &names {
        let tm = ctx.recipe(name, &gen)?;
        if plan.trials_per_task > 0 {
            ctx.eval_rubric_cell(&mut rep, &tm, &ProviderSpec::Model, name)?;
        }
        if plan.lang_trials > 0 {
            ctx.eval_lang_cell(&mut rep, &tm, &ProviderSpec::Model, &format!("{name}_lang"))?;
        }
    }
    ctx.finish(rep, "full")
}

/// Representation comparison: the full two-stage recipe against an
/// action-token-only variant (no language/web pools, evaluated without
/// subtask inference) and a single-stage continuous-only variant that skips
/// discrete pre-training entirely.
pub fn run_model_compare(
    plan: &ExperimentPlan,
    cfg: &ModelConfig,
    out: &Path,
) -> Result<BenchReport> {
    let ctx = Ctx::new(plan, cfg, out, PlanKind::ModelCompare)?;
    let mut rep = ctx.report();
    if plan.trials_per_task == 0 {
        rep.note("zero trials per task: nothing evaluated");
        rep.write(&ctx.out)?;
        return Ok(rep);
    }
    let gen = plan.gen_config(&plan.train_envs, 1, 1);

    let tm = ctx.recipe("full", &gen)?;
    ctx.eval_rubric_cell(&mut rep, &tm, &ProviderSpec::Model, "full")?;

    // Robot-action data only, both stages; no language supervision, so the
    // policy runs without subtask inference.
    let mut pre = ctx.pre_mix();
    zero_weights(&mut pre, &["HL", "WD"]);
    let mut post = ctx.post_mix();
    zero_weights(&mut post, &["HL", "WD", "VI"]);
    let base = ctx.pretrain("action_only-pre", &gen, &pre, Some(&plan.heldout_envs))?;
    let tm = ctx.posttrain("action_only", &base, &gen, &post, None, Some(&plan.heldout_envs))?;
    ctx.eval_rubric_cell(&mut rep, &tm, &ProviderSpec::Implicit, "action_only")?;

    // No discrete stage at all: one flow-matching run with the combined
    // step budget.
    let mut single = post.clone();
    single.steps = plan.pretrain_steps + plan.posttrain_steps;
    let tm = ctx.scratch_single_stage("flow_only", &gen, &single)?;
    ctx.eval_rubric_cell(&mut rep, &tm, &ProviderSpec::Implicit, "flow_only")?;

    ctx.finish(rep, "full")
}

/// Subtask-inference strategies over a shared set of checkpoints: the
/// planning stack itself is varied at evaluation time (model-predicted,
/// implicit, oracle, fixed external label) alongside the training-side
/// ablations that remove the data teaching it.
pub fn run_hl_ablation(
    plan: &ExperimentPlan,
    cfg: &ModelConfig,
    out: &Path,
) -> Result<BenchReport> {
    let ctx = Ctx::new(plan, cfg, out, PlanKind::HlAblation)?;
    let mut rep = ctx.report();
    if plan.trials_per_task == 0 {
        rep.note("zero trials per task: nothing evaluated");
        rep.write(&ctx.out)?;
        return Ok(rep);
    }
    let gen = plan.gen_config(&plan.train_envs, 1, 1);
    let mut external_label: Option<String> = None;
    for strat in &plan.strategies {
        let (recipe_name, spec) = match strat.as_str() {
            "model" => ("full", ProviderSpec::Model),
            "no_wd" => ("no_wd", ProviderSpec::Model),
            "no_vi" => ("no_vi", ProviderSpec::Model),
            "implicit" => ("full", ProviderSpec::Implicit),
            "none" => ("no_hl", ProviderSpec::Implicit),
            "external" => {
                let label = match &external_label {
                    Some(l) => l.clone(),
                    None => {
                        let (records, _) = generate_dataset(&gen)?;
                        let l = most_frequent_subtask(&records).ok_or_else(|| {
                            Error::InvalidConfig("no subtask labels in dataset".into())
                        })?;
                        external_label = Some(l.clone());
                        l
                    }
                };
                ("full", ProviderSpec::External(label))
            }
            "oracle" => ("full", ProviderSpec::Oracle),
            other => {
                return Err(Error::InvalidConfig(format!("unknown strategy {other}")));
            }
        };
        let tm = ctx.recipe(recipe_name, &gen)?;
        ctx.eval_rubric_cell(&mut rep, &tm, &spec, strat)?;
    }
    let reference =
        if plan.strategies.iter().any(|s| s == "model") { "model" } else { &plan.strategies[0] };
    ctx.finish(rep, reference)
}

/// Language-following rates on fetch commands: the trained policy on both
/// in-distribution and out-of-distribution object vocabularies, plus the
/// scripted uniform-random target-selection floor.
pub fn run_language_following(
    plan: &ExperimentPlan,
    cfg: &ModelConfig,
    out: &Path,
) -> Result<BenchReport> {
    let ctx = Ctx::new(plan, cfg, out, PlanKind::LanguageFollowing)?;
    let mut rep = ctx.report();
    if plan.lang_trials == 0 && plan.random_trials == 0 {
        rep.note("zero trials: nothing evaluated");
        rep.write(&ctx.out)?;
        return Ok(rep);
    }
    if plan.lang_trials > 0 {
        let gen = plan.gen_config(&plan.train_envs, 1, 1);
        let tm = ctx.recipe("full", &gen)?;
        ctx.eval_lang_cell(&mut rep, &tm, &ProviderSpec::Model, "full")?;
    }
    if plan.random_trials > 0 {
        let (recs, logs) =
            random_choice_trials(&plan.heldout_envs, plan.random_trials, plan.seed)?;
        write_episode_logs(&ctx.out.join("episodes").join("random.jsonl"), &logs)?;
        for c in summarize_cell("random", &recs) {
            rep.add_cell(c);
        }
        rep.note("random: scripted uniform choice over visible objects");
    }
    ctx.finish(rep, "full")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::plan::DataScale;
    use crate::model::config::ModelConfig;

    fn tiny_cfg() -> ModelConfig {
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
        // Codec fitting always trains a full-size action vocabulary, so the
        // reserved id range stays at the default.
        cfg
    }

    fn tiny_plan(kind: PlanKind) -> ExperimentPlan {
        let mut p = ExperimentPlan::new(kind);
        p.seed = 3;
        p.trials_per_task = 1;
        p.train_envs = vec![0, 1];
        p.heldout_envs = vec![16];
        p.env_grid = vec![1, 2];
        p.ablations = vec!["no_wd".to_string()];
        p.strategies = vec!["model".to_string(), "implicit".to_string(), "oracle".to_string()];
        p.pretrain_steps = 2;
        p.posttrain_steps = 2;
        p.batch_size = 2;
        p.lang_trials = 2;
        p.random_trials = 4;
        p.eval_step_limit = Some(8);
        p.data = DataScale {
            mm_seeds_per_task: 1,
            me_seeds_per_task: 1,
            lab_count: 4,
            web_count: 12,
            vi_rollouts: 2,
            vi_noise: 0.25,
        };
        p
    }

    fn ckpt_names(dir: &Path) -> Vec<String> {
        let mut v: Vec<String> = std::fs::read_dir(dir.join("checkpoints"))
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .filter(|n| n.ends_with(".ckpt"))
            .collect();
        v.sort();
        v
    }

    #[test]
    fn zeroed_category_tables_match_the_ablation_names() {
        // Each single-category ablation zeroes exactly that category.
        for (name, cat) in [("no_wd", "WD"), ("no_me", "ME"), ("no_hl", "HL")] {
            let (pre, post) = ablation_zeroed(name).unwrap();
            assert_eq!(pre, &[cat], "{name}");
            assert_eq!(post, &[cat], "{name}");
        }
        // Stage-specific pools are only zeroed in the stage they exist in.
        assert_eq!(ablation_zeroed("no_ce").unwrap(), (&["CE"][..], &[][..]));
        assert_eq!(ablation_zeroed("no_vi").unwrap(), (&[][..], &["VI"][..]));
        // The combined ablation removes both transfer-bearing pools.
        let (pre, post) = ablation_zeroed("no_me_or_ce").unwrap();
        assert_eq!(pre, &["ME", "CE"]);
        assert_eq!(post, &["ME"]);
        assert!(ablation_zeroed("bogus").is_err());

        // Zeroing leaves other weights untouched and never invents keys.
        let mut mix = MixtureConfig::pretrain_default(0);
        let before = mix.weights.clone();
        zero_weights(&mut mix, &["WD", "NOPE"]);
        assert_eq!(mix.weights["WD"], 0.0);
        assert!(!mix.weights.contains_key("NOPE"));
        for (k, v) in &before {
            if k != "WD" {
                assert_eq!(mix.weights[k], *v);
            }
        }
    }

    #[test]
    fn env_scaling_runs_cells_and_replays_bit_exactly() {
        let plan = tiny_plan(PlanKind::EnvScaling);
        let cfg = tiny_cfg();
        let dir = tempfile::tempdir().unwrap();
        let rep = run_env_scaling(&plan, &cfg, dir.path()).unwrap();

        for cell in ["envs_01", "envs_02"] {
            let all = rep.cell(cell, "all").unwrap();
            assert_eq!(all.trials, 4, "{cell}: 4 tasks x 1 trial");
            assert!(dir.path().join("episodes").join(format!("{cell}.jsonl")).exists());
        }
        assert!(rep.notes.iter().any(|n| n.contains("equalized")));
        assert!(dir.path().join("cells.csv").exists());
        assert!(dir.path().join("summary.json").exists());
        assert!(dir.path().join("plan.toml").exists());
        // Shared base + one post-training product per grid point.
        let names = ckpt_names(dir.path());
        assert_eq!(names.len(), 3, "{names:?}");
        assert!(names.iter().any(|n| n.starts_with("scaling-pre-")));

        // Re-running in the same directory reuses every checkpoint and
        // reproduces the report byte-for-byte.
        let before = names
            .iter()
            .map(|n| std::fs::read(dir.path().join("checkpoints").join(n)).unwrap())
            .collect::<Vec<_>>();
        let rep2 = run_env_scaling(&plan, &cfg, dir.path()).unwrap();
        assert_eq!(serde_json::to_string(&rep).unwrap(), serde_json::to_string(&rep2).unwrap());
        for (n, b) in names.iter().zip(&before) {
            assert_eq!(&std::fs::read(dir.path().join("checkpoints").join(n)).unwrap(), b, "{n}");
        }

        // A fresh directory reproduces the same checkpoints and report.
        let dir2 = tempfile::tempdir().unwrap();
        let rep3 = run_env_scaling(&plan, &cfg, dir2.path()).unwrap();
        assert_eq!(serde_json::to_string(&rep).unwrap(), serde_json::to_string(&rep3).unwrap());
        assert_eq!(ckpt_names(dir2.path()), names);
        for (n, b) in names.iter().zip(&before) {
            assert_eq!(&std::fs::read(dir2.path().join("checkpoints").join(n)).unwrap(), b, "{n}");
        }
    }

    #[test]
    fn zero_trials_writes_an_empty_report_without_training() {
        let mut plan = tiny_plan(PlanKind::EnvScaling);
        plan.trials_per_task = 0;
        let cfg = tiny_cfg();
        let dir = tempfile::tempdir().unwrap();
        let rep = run_env_scaling(&plan, &cfg, dir.path()).unwrap();
        assert!(rep.cells.is_empty());
        assert!(ckpt_names(dir.path()).is_empty());
        let csv = std::fs::read_to_string(dir.path().join("cells.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1, "header only");
    }

    #[test]
    fn mixture_ablation_reports_rubric_and_language_cells() {
        let plan = tiny_plan(PlanKind::MixtureAblation);
        let cfg = tiny_cfg();
        let dir = tempfile::tempdir().unwrap();
        let rep = run_mixture_ablation(&plan, &cfg, dir.path()).unwrap();

        for cell in ["full", "no_wd"] {
            assert!(rep.cell(cell, "all").is_some(), "{cell}");
            let lang = rep.cell(&format!("{cell}_lang"), "all").unwrap();
            assert_eq!(lang.trials, 4, "{cell}: 2 in-distribution + 2 ood fetches");
            assert!(rep.cell(&format!("{cell}_lang"), "id").is_some());
            assert!(rep.cell(&format!("{cell}_lang"), "ood").is_some());
        }
        // Significance rows compare every non-reference cell against "full".
        assert!(!rep.significance.is_empty());
        assert!(rep.significance.iter().all(|s| s.reference == "full"));
        assert!(rep.significance.iter().any(|s| s.cell == "no_wd"));
        // Four training products: shared full pre, no_wd pre, two posts.
        assert_eq!(ckpt_names(dir.path()).len(), 4);
    }

    #[test]
    fn hl_strategies_share_checkpoints_where_specified() {
        let plan = tiny_plan(PlanKind::HlAblation);
        let cfg = tiny_cfg();
        let dir = tempfile::tempdir().unwrap();
        let rep = run_hl_ablation(&plan, &cfg, dir.path()).unwrap();

        for cell in ["model", "implicit", "oracle"] {
            assert_eq!(rep.cell(cell, "all").unwrap().trials, 4, "{cell}");
        }
        // All three strategies evaluate the very same trained weights; only
        // the subtask source differs.
        let ckpt_note = |cell: &str| {
            rep.notes
                .iter()
                .find(|n| n.starts_with(&format!("cell {cell}:")))
                .unwrap()
                .split("checkpoint ")
                .nth(1)
                .unwrap()
                .to_string()
        };
        assert_eq!(ckpt_note("model"), ckpt_note("oracle"));
        assert_eq!(ckpt_note("model"), ckpt_note("implicit"));
        assert!(rep.significance.iter().all(|s| s.reference == "model"));
        // One pre-training + one post-training product in total.
        assert_eq!(ckpt_names(dir.path()).len(), 2);
    }

    #[test]
    fn language_following_reports_policy_and_random_cells() {
        let plan = tiny_plan(PlanKind::LanguageFollowing);
        let cfg = tiny_cfg();
        let dir = tempfile::tempdir().unwrap();
        let rep = run_language_following(&plan, &cfg, dir.path()).unwrap();

        let full = rep.cell("full", "all").unwrap();
        assert_eq!(full.trials, 4);
        assert!(rep.cell("full", "id").is_some());
        assert!(rep.cell("full", "ood").is_some());
        let random = rep.cell("random", "all").unwrap();
        assert_eq!(random.trials, 4);
        // The scripted baseline can only succeed at the commanded task by
        // picking the commanded object, so success never exceeds following.
        for row in rep.cells.iter().filter(|c| c.cell == "random") {
            let f = row.following_rate.expect("fetch trials always mark following");
            assert!(row.success_rate.unwrap() <= f + 1e-12);
        }
        assert!(dir.path().join("episodes").join("random.jsonl").exists());
        assert!(dir.path().join("episodes").join("full.jsonl").exists());
    }

    #[test]
    fn model_compare_covers_all_three_representations() {
        let mut plan = tiny_plan(PlanKind::ModelCompare);
        plan.lang_trials = 0;
        plan.random_trials = 0;
        let cfg = tiny_cfg();
        let dir = tempfile::tempdir().unwrap();
        let rep = run_model_compare(&plan, &cfg, dir.path()).unwrap();
        for cell in ["full", "action_only", "flow_only"] {
            assert_eq!(rep.cell(cell, "all").unwrap().trials, 4, "{cell}");
        }
        // full pre + full post + action_only pre + action_only post +
        // flow_only single-stage.
        assert_eq!(ckpt_names(dir.path()).len(), 5);
    }

    #[test]
    fn runners_reject_plans_of_the_wrong_kind() {
        let plan = tiny_plan(PlanKind::LanguageFollowing);
        let cfg = tiny_cfg();
        let dir = tempfile::tempdir().unwrap();
        let err = run_env_scaling(&plan, &cfg, dir.path()).unwrap_err();
        assert!(err.to_string().contains("language_following"));
    }
}
