//! Declarative experiment plans.
//!
//! A plan is a small TOML document selecting one study design and its knobs:
//! environment-count scaling, training-mixture ablations, model-variant
//! comparison, high-level-strategy ablations, or language following. Every
//! report embeds the plan's content hash so result files are traceable to
//! the exact configuration that produced them.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::world::dataset::GenConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanKind {
    EnvScaling,
    MixtureAblation,
    ModelCompare,
    HlAblation,
    LanguageFollowing,
}

impl PlanKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "env_scaling" => Ok(PlanKind::EnvScaling),
            "mixture_ablation" => Ok(PlanKind::MixtureAblation),
            "model_compare" => Ok(PlanKind::ModelCompare),
            "hl_ablation" => Ok(PlanKind::HlAblation),
            "language_following" => Ok(PlanKind::LanguageFollowing),
            other => Err(Error::InvalidConfig(format!("unknown plan kind {other:?}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PlanKind::EnvScaling => "env_scaling",
            PlanKind::MixtureAblation => "mixture_ablation",
            PlanKind::ModelCompare => "model_compare",
            PlanKind::HlAblation => "hl_ablation",
            PlanKind::LanguageFollowing => "language_following",
        }
    }
}

/// Dataset-size knobs; defaults match the full-scale generation config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataScale {
    #[serde(default = "d_mm_seeds")]
    pub mm_seeds_per_task: usize,
    #[serde(default = "d_me_seeds")]
    pub me_seeds_per_task: usize,
    #[serde(default = "d_lab")]
    pub lab_count: usize,
    #[serde(default = "d_web")]
    pub web_count: usize,
    #[serde(default = "d_vi")]
    pub vi_rollouts: usize,
    #[serde(default = "d_vi_noise")]
    pub vi_noise: f64,
}

fn d_mm_seeds() -> usize {
    2
}
fn d_me_seeds() -> usize {
    2
}
fn d_lab() -> usize {
    96
}
fn d_web() -> usize {
    900
}
fn d_vi() -> usize {
    24
}
fn d_vi_noise() -> f64 {
    0.25
}

impl Default for DataScale {
    fn default() -> Self {
        DataScale {
            mm_seeds_per_task: d_mm_seeds(),
            me_seeds_per_task: d_me_seeds(),
            lab_count: d_lab(),
            web_count: d_web(),
            vi_rollouts: d_vi(),
            vi_noise: d_vi_noise(),
        }
    }
}

pub const KNOWN_ABLATIONS: [&str; 6] =
    ["no_wd", "no_me", "no_ce", "no_me_or_ce", "no_hl", "no_vi"];
pub const KNOWN_STRATEGIES: [&str; 7] =
    ["model", "no_wd", "no_vi", "implicit", "none", "external", "oracle"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub kind: PlanKind,
    #[serde(default)]
    pub seed: u64,
    /// Rubric trials per (task, cell).
    #[serde(default = "d_trials")]
    pub trials_per_task: usize,
    #[serde(default = "d_train_envs")]
    pub train_envs: Vec<u64>,
    #[serde(default = "d_heldout_envs")]
    pub heldout_envs: Vec<u64>,
    /// Environment counts for the scaling study; prefixes of `train_envs`.
    #[serde(default = "d_env_grid")]
    pub env_grid: Vec<usize>,
    /// Mixture-ablation cells to train alongside `full`.
    #[serde(default = "d_ablations")]
    pub ablations: Vec<String>,
    /// High-level strategy cells.
    #[serde(default = "d_strategies")]
    pub strategies: Vec<String>,
    #[serde(default = "d_pretrain_steps")]
    pub pretrain_steps: usize,
    #[serde(default = "d_posttrain_steps")]
    pub posttrain_steps: usize,
    #[serde(default = "d_batch_size")]
    pub batch_size: usize,
    /// Also run the in-test-env control and the two from-scratch baselines
    /// in the scaling study.
    #[serde(default)]
    pub include_controls: bool,
    /// Language-following trials per model cell (ID and OOD separately).
    #[serde(default = "d_lang_trials")]
    pub lang_trials: usize,
    /// Trials for the scripted random-selection baseline.
    #[serde(default = "d_random_trials")]
    pub random_trials: usize,
    /// Episode step cap during evaluation; `None` uses the embodiment
    /// defaults (full-length episodes).
    #[serde(default)]
    pub eval_step_limit: Option<usize>,
    #[serde(default)]
    pub data: DataScale,
}

fn d_trials() -> usize {
    10
}
fn d_train_envs() -> Vec<u64> {
    (0..16).collect()
}
fn d_heldout_envs() -> Vec<u64> {
    (16..20).collect()
}
fn d_env_grid() -> Vec<usize> {
    vec![1, 2, 4, 8, 16]
}
fn d_ablations() -> Vec<String> {
    ["no_wd", "no_me", "no_ce", "no_me_or_ce"]
        .map(String::from)
        .to_vec()
}
fn d_strategies() -> Vec<String> {
    KNOWN_STRATEGIES.map(String::from).to_vec()
}
fn d_pretrain_steps() -> usize {
    3000
}
fn d_posttrain_steps() -> usize {
    1000
}
fn d_batch_size() -> usize {
    16
}
fn d_lang_trials() -> usize {
    50
}
fn d_random_trials() -> usize {
    400
}

impl ExperimentPlan {
    /// A plan of the given kind with every other field at its default.
    pub fn new(kind: PlanKind) -> Self {
        ExperimentPlan {
            kind,
            seed: 0,
            trials_per_task: d_trials(),
            train_envs: d_train_envs(),
            heldout_envs: d_heldout_envs(),
            env_grid: d_env_grid(),
            ablations: d_ablations(),
            strategies: d_strategies(),
            pretrain_steps: d_pretrain_steps(),
            posttrain_steps: d_posttrain_steps(),
            batch_size: d_batch_size(),
            include_controls: false,
            lang_trials: d_lang_trials(),
            random_trials: d_random_trials(),
            eval_step_limit: None,
            data: DataScale::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let plan: ExperimentPlan =
            toml::from_str(s).map_err(|e| Error::InvalidConfig(format!("plan parse: {e}")))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("plan serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let dup = |xs: &[u64]| xs.iter().collect::<BTreeSet<_>>().len() != xs.len();
        if self.train_envs.is_empty() {
            return Err(Error::InvalidConfig("train_envs must be non-empty".into()));
        }
        if self.heldout_envs.is_empty() {
            return Err(Error::InvalidConfig("heldout_envs must be non-empty".into()));
        }
        if dup(&self.train_envs) || dup(&self.heldout_envs) {
            return Err(Error::InvalidConfig("duplicate environment ids".into()));
        }
        if let Some(e) = self.heldout_envs.iter().find(|e| self.train_envs.contains(e)) {
            return Err(Error::InvalidConfig(format!(
                "environment {e} is both trained on and held out"
            )));
        }
        if self.kind == PlanKind::EnvScaling {
            if self.env_grid.is_empty() {
                return Err(Error::InvalidConfig("env_grid must be non-empty".into()));
            }
            if !self.env_grid.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::InvalidConfig("env_grid must be strictly increasing".into()));
            }
        }
        for &k in &self.env_grid {
            if k == 0 || k > self.train_envs.len() {
                return Err(Error::InvalidConfig(format!(
                    "env_grid entry {k} outside 1..={}",
                    self.train_envs.len()
                )));
            }
        }
        for a in &self.ablations {
            if !KNOWN_ABLATIONS.contains(&a.as_str()) {
                return Err(Error::InvalidConfig(format!(
                    "unknown ablation {a:?} (known: {KNOWN_ABLATIONS:?})"
                )));
            }
        }
        for s in &self.strategies {
            if !KNOWN_STRATEGIES.contains(&s.as_str()) {
                return Err(Error::InvalidConfig(format!(
                    "unknown strategy {s:?} (known: {KNOWN_STRATEGIES:?})"
                )));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.data.mm_seeds_per_task == 0 || self.data.me_seeds_per_task == 0 {
            return Err(Error::InvalidConfig("episode seeds per task must be >= 1".into()));
        }
        if self.data.lab_count == 0 || self.data.web_count == 0 || self.data.vi_rollouts == 0 {
            return Err(Error::InvalidConfig("every data pool needs at least one item".into()));
        }
        if !self.data.vi_noise.is_finite() || self.data.vi_noise < 0.0 {
            return Err(Error::InvalidConfig("vi_noise must be finite and >= 0".into()));
        }
        if self.eval_step_limit == Some(0) {
            return Err(Error::InvalidConfig("eval_step_limit must be >= 1".into()));
        }
        Ok(())
    }

    /// Generation config for `envs`, with episode seeds per (env, task)
    /// multiplied by `mm_mult`/`me_mult` (used to equalize sample counts
    /// across scaling cells).
    pub fn gen_config(&self, envs: &[u64], mm_mult: usize, me_mult: usize) -> GenConfig {
        GenConfig {
            seed: self.seed,
            envs: envs.to_vec(),
            mm_seeds_per_task: self.data.mm_seeds_per_task * mm_mult,
            me_seeds_per_task: self.data.me_seeds_per_task * me_mult,
            lab_count: self.data.lab_count,
            web_count: self.data.web_count,
            vi_rollouts: self.data.vi_rollouts,
            vi_noise: self.data.vi_noise,
        }
    }

    /// FNV-1a hash of the canonical JSON form, as 16 hex digits.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("plan serializes");
        format!("{:016x}", fnv1a64(json.as_bytes()))
    }
}

/// FNV-1a 64-bit hash (stable across runs and platforms).
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
