//! Co-training mixture: category-weighted sampling over heterogeneous data
//! pools, and assembly of model-ready sequences per stage.
//!
//! Pre-training is purely autoregressive: robot action records become
//! discrete-token targets (conditioning on the recorded subtask), while
//! subtask-prediction, web, and lab records supply text targets. α is
//! forced to 0 and verbal-instruction data is excluded.
//!
//! Post-training drops the lab cross-embodiment pool, adds the
//! verbal-instruction pool, filters robot episodes to successful ones below
//! a length quantile, and converts action records into flow-matching
//! examples for the action expert (α = 10 by default). A small fraction of
//! flow examples condition on the original prompt instead of the subtask so
//! the policy also works without an explicit high-level step.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{fit_normalizer, pad_actions, ActionChunk, NormStats};
use crate::codec::{encode_fast, train_fast_vocab, FastVocab, VocabTrainConfig};
use crate::model::config::ModelConfig;
use crate::model::sequence::{build_sequence, MixedSequence, SeqTarget};
use crate::text::TextVocab;
use crate::trainer::augment::augment_image;
use crate::trainer::flow::{make_flow_sample, TAU_S};
use crate::trainer::optim::OptimConfig;
use crate::world::dataset::Record;
use crate::world::render::Image;
use crate::{Error, Result};

pub const CATEGORIES: [&str; 6] = ["MM", "ME", "CE", "HL", "WD", "VI"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Pretrain,
    Posttrain,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureConfig {
    pub stage: Stage,
    /// Per-category sampling weights; missing keys mean 0.
    pub weights: BTreeMap<String, f64>,
    /// Flow-loss coefficient.
    pub alpha: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub optim: OptimConfig,
    /// Post-training keeps successful episodes with length at or below this
    /// quantile of successful-episode lengths.
    pub ep_len_quantile: f64,
    /// Fraction of flow examples conditioned on the raw prompt rather than
    /// the recorded subtask.
    pub implicit_prompt_frac: f64,
    /// Apply photometric/geometric image augmentation when building batches.
    pub augment: bool,
    pub seed: u64,
}

fn weights_of(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

impl MixtureConfig {
    /// Mostly non-robot-heavy mixture: the mobile pool gets 2.4% and the
    /// remainder splits uniformly across the other pre-training pools.
    pub fn pretrain_default(seed: u64) -> Self {
        MixtureConfig {
            stage: Stage::Pretrain,
            weights: weights_of(&[
                ("MM", 0.024),
                ("ME", 0.244),
                ("CE", 0.244),
                ("HL", 0.244),
                ("WD", 0.244),
            ]),
            alpha: 0.0,
            steps: 3000,
            batch_size: 16,
            optim: OptimConfig {
                lr_max: 2e-3,
                lr_min: 2e-4,
                warmup: 100,
                total_steps: 3000,
                ..OptimConfig::default()
            },
            ep_len_quantile: 0.95,
            implicit_prompt_frac: 0.2,
            augment: true,
            seed,
        }
    }

    pub fn posttrain_default(seed: u64) -> Self {
        MixtureConfig {
            stage: Stage::Posttrain,
            weights: weights_of(&[
                ("MM", 0.45),
                ("ME", 0.10),
                ("HL", 0.20),
                ("WD", 0.05),
                ("VI", 0.20),
            ]),
            alpha: 10.0,
            steps: 1000,
            batch_size: 16,
            optim: OptimConfig {
                lr_max: 1e-3,
                lr_min: 1e-4,
                warmup: 50,
                total_steps: 1000,
                ..OptimConfig::default()
            },
            ep_len_quantile: 0.95,
            implicit_prompt_frac: 0.2,
            augment: true,
            seed,
        }
    }

    pub fn weight(&self, cat: &str) -> f64 {
        self.weights.get(cat).copied().unwrap_or(0.0)
    }

    /// Enforce stage invariants; returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        let mut total = 0.0;
        for (k, &w) in &self.weights {
            if !CATEGORIES.contains(&k.as_str()) {
                return Err(Error::InvalidConfig(format!("unknown category {k}")));
            }
            if w < 0.0 || !w.is_finite() {
                return Err(Error::InvalidConfig(format!("weight {k}={w}")));
            }
            total += w;
        }
        if total <= 0.0 {
            return Err(Error::InvalidConfig("mixture weights sum to zero".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.implicit_prompt_frac) {
            return Err(Error::InvalidConfig("implicit_prompt_frac outside [0,1]".into()));
        }
        match self.stage {
            Stage::Pretrain => {
                if self.alpha != 0.0 {
                    return Err(Error::InvalidConfig(
                        "pre-training must use alpha = 0 (no action expert yet)".into(),
                    ));
                }
                if self.weight("VI") > 0.0 {
                    return Err(Error::InvalidConfig(
                        "verbal-instruction data is a post-training pool".into(),
                    ));
                }
            }
            Stage::Posttrain => {
                if self.weight("CE") > 0.0 {
                    return Err(Error::InvalidConfig(
                        "lab cross-embodiment data is excluded from post-training".into(),
                    ));
                }
                if self.alpha < 0.0 {
                    return Err(Error::InvalidConfig("alpha must be >= 0".into()));
                }
                if self.weight("VI") == 0.0 {
                    warnings.push("post-training without verbal-instruction data".into());
                }
                if self.alpha == 0.0 {
                    warnings.push("post-training with alpha = 0 trains no flow head".into());
                }
            }
        }
        Ok(warnings)
    }
}

/// Frozen action-codec artifacts, fit once on the pre-training corpus:
/// per-embodiment quantile normalizers and the learned discrete vocabulary
/// over normalized padded chunks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CodecArtifacts {
    pub norms: BTreeMap<String, NormStats>,
    pub fast: FastVocab,
}

impl CodecArtifacts {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("artifacts serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Normalize a record's chunk with its embodiment's stats and zero-pad
    /// to the shared width.
    pub fn normalized_padded(&self, rec: &Record, d_max: usize) -> Result<ActionChunk> {
        let chunk = record_chunk(rec)?;
        let stats = self.norms.get(&rec.embodiment).ok_or_else(|| {
            Error::InvalidConfig(format!("no normalizer for embodiment {}", rec.embodiment))
        })?;
        let norm = stats.normalize(&chunk)?;
        pad_actions(&norm, d_max)
    }
}

/// Flatten a record's action rows into a chunk.
pub fn record_chunk(rec: &Record) -> Result<ActionChunk> {
    if rec.actions.is_empty() {
        return Err(Error::EmptyInput("record has no actions"));
    }
    let dim = rec.actions[0].len();
    let mut values = Vec::with_capacity(rec.actions.len() * dim);
    for row in &rec.actions {
        if row.len() != dim {
            return Err(Error::DimMismatch {
                context: "ragged action rows",
                expected: dim,
                got: row.len(),
            });
        }
        values.extend_from_slice(row);
    }
    Ok(ActionChunk::new(rec.actions.len(), dim, values, &rec.control_mode))
}

/// Fit normalizers and the discrete action vocabulary on the pre-training
/// action corpus (all action-bearing records).
pub fn fit_codec(records: &[Record], d_max: usize, fast_tokens: usize) -> Result<CodecArtifacts> {
    let mut by_emb: BTreeMap<String, Vec<ActionChunk>> = BTreeMap::new();
    for r in records {
        if r.has_actions() {
            by_emb.entry(r.embodiment.clone()).or_default().push(record_chunk(r)?);
        }
    }
    if by_emb.is_empty() {
        return Err(Error::EmptyInput("no action records to fit the codec"));
    }
    let mut norms = BTreeMap::new();
    for (emb, chunks) in &by_emb {
        norms.insert(emb.clone(), fit_normalizer(chunks)?);
    }
    let mut corpus = Vec::new();
    for (emb, chunks) in &by_emb {
        let stats = &norms[emb];
        for c in chunks {
            corpus.push(pad_actions(&stats.normalize(c)?, d_max)?);
        }
    }
    let cfg = VocabTrainConfig::default();
    let fast = train_fast_vocab(&corpus, cfg)?;
    if fast.token_count() > fast_tokens {
        return Err(Error::InvalidConfig(format!(
            "trained vocabulary needs {} ids but the model reserves {fast_tokens}",
            fast.token_count()
        )));
    }
    Ok(CodecArtifacts { norms, fast })
}

/// Per-category record pools after stage filtering.
#[derive(Debug, Clone)]
pub struct TrainSets {
    pub pools: BTreeMap<String, Vec<Record>>,
    pub artifacts: CodecArtifacts,
    /// Episode-length threshold applied to robot pools (post-training).
    pub ep_len_threshold: Option<usize>,
}

/// The episode-length quantile over successful action-bearing records.
pub fn success_length_quantile(records: &[Record], q: f64) -> Option<usize> {
    let mut lens: Vec<usize> = records
        .iter()
        .filter(|r| r.has_actions() && r.success)
        .map(|r| r.ep_len)
        .collect();
    if lens.is_empty() {
        return None;
    }
    lens.sort_unstable();
    let idx = ((lens.len() as f64 - 1.0) * q).round() as usize;
    Some(lens[idx.min(lens.len() - 1)])
}

/// Partition records into category pools, applying the stage's filters.
pub fn prepare_sets(
    records: &[Record],
    stage: Stage,
    ep_len_quantile: f64,
    artifacts: CodecArtifacts,
) -> TrainSets {
    let threshold = match stage {
        Stage::Pretrain => None,
        Stage::Posttrain => success_length_quantile(records, ep_len_quantile),
    };
    let mut pools: BTreeMap<String, Vec<Record>> = BTreeMap::new();
    for r in records {
        let keep = match stage {
            Stage::Pretrain => true,
            Stage::Posttrain => match r.category.as_str() {
                // Robot episode data: keep short, successful episodes.
                "MM" | "ME" | "HL" => {
                    r.success && threshold.map(|t| r.ep_len <= t).unwrap_or(true)
                }
                "CE" => false,
                _ => true,
            },
        };
        if keep {
            pools.entry(r.category.clone()).or_default().push(r.clone());
        }
    }
    TrainSets {
        pools,
        artifacts,
        ep_len_threshold: threshold,
    }
}

/// Cap each pool at `caps[category]` records (generation order), used to
/// equalize unique-sample counts across experiment cells.
pub fn truncate_pools(sets: &mut TrainSets, caps: &BTreeMap<String, usize>) {
    for (cat, cap) in caps {
        if let Some(pool) = sets.pools.get_mut(cat) {
            pool.truncate(*cap);
        }
    }
}

/// One training example: the assembled sequence plus bookkeeping for tests
/// and metrics.
#[derive(Debug)]
pub struct BatchItem {
    pub seq: MixedSequence,
    pub category: String,
    /// Flow example conditioned on the raw prompt instead of the subtask.
    pub used_implicit: bool,
}

/// Weighted category draw (uniform within weight mass).
pub fn sample_category<'a>(cfg: &'a MixtureConfig, rng: &mut ChaCha8Rng) -> &'a str {
    let total: f64 = cfg.weights.values().sum();
    let mut r = rng.gen::<f64>() * total;
    let mut last = "";
    for (k, &w) in &cfg.weights {
        if w <= 0.0 {
            continue;
        }
        last = k;
        if r < w {
            return k;
        }
        r -= w;
    }
    last
}

fn decode_images(rec: &Record, rng: &mut ChaCha8Rng, augment: bool) -> Result<Vec<Image>> {
    let mut out = Vec::with_capacity(rec.images.len());
    for im in &rec.images {
        let img = im.to_image()?;
        out.push(if augment { augment_image(&img, rng) } else { img });
    }
    Ok(out)
}

/// Build the model sequence for one record under the given stage.
pub fn build_item(
    rec: &Record,
    stage: Stage,
    cfg: &MixtureConfig,
    model_cfg: &ModelConfig,
    vocab: &TextVocab,
    artifacts: &CodecArtifacts,
    rng: &mut ChaCha8Rng,
) -> Result<BatchItem> {
    let images = decode_images(rec, rng, cfg.augment)?;
    let (seq, used_implicit) = match rec.category.as_str() {
        // Text-target pools: question → answer, or observation → subtask,
        // with a location box when the record carries one.
        "WD" | "HL" | "VI" => {
            let seq = build_sequence(
                model_cfg,
                vocab,
                &images,
                &rec.prompt,
                &rec.control_mode,
                &rec.proprio,
                SeqTarget::Text(rec.subtask.clone(), rec.boxes.first().copied()),
                None,
            )?;
            (seq, false)
        }
        "MM" | "ME" | "CE" => {
            let padded = artifacts.normalized_padded(rec, model_cfg.d_max)?;
            match stage {
                // Autoregressive stage: discrete action tokens conditioned
                // on the recorded subtask.
                Stage::Pretrain => {
                    let tokens = encode_fast(&artifacts.fast, &padded)?;
                    for &t in &tokens {
                        if t as usize >= model_cfg.fast_tokens {
                            return Err(Error::TokenOutOfRange(t, model_cfg.fast_tokens));
                        }
                    }
                    let seq = build_sequence(
                        model_cfg,
                        vocab,
                        &images,
                        &rec.subtask,
                        &rec.control_mode,
                        &rec.proprio,
                        SeqTarget::Fast(tokens),
                        None,
                    )?;
                    (seq, false)
                }
                // Flow stage: noisy continuous suffix for the action expert.
                Stage::Posttrain => {
                    let implicit = rng.gen::<f64>() < cfg.implicit_prompt_frac;
                    let conditioning = if implicit { &rec.prompt } else { &rec.subtask };
                    let flow = make_flow_sample(&padded, rng, TAU_S)?;
                    let seq = build_sequence(
                        model_cfg,
                        vocab,
                        &images,
                        conditioning,
                        &rec.control_mode,
                        &rec.proprio,
                        SeqTarget::None,
                        Some(flow.suffix()),
                    )?;
                    (seq, implicit)
                }
            }
        }
        other => return Err(Error::InvalidConfig(format!("unknown category {other}"))),
    };
    Ok(BatchItem {
        seq,
        category: rec.category.clone(),
        used_implicit,
    })
}

/// Check that every positively weighted category has a nonempty pool.
pub fn check_pools(cfg: &MixtureConfig, sets: &TrainSets) -> Result<()> {
    for (cat, &w) in &cfg.weights {
        if w > 0.0 && sets.pools.get(cat).map(Vec::len).unwrap_or(0) == 0 {
            return Err(Error::InvalidConfig(format!(
                "category {cat} has weight {w} but an empty pool"
            )));
        }
    }
    Ok(())
}

/// The deterministic batch for one step.
pub fn sample_batch(
    sets: &TrainSets,
    cfg: &MixtureConfig,
    model_cfg: &ModelConfig,
    vocab: &TextVocab,
    step: usize,
) -> Result<Vec<BatchItem>> {
    let mut rng = crate::seeding::rng(cfg.seed, &[0xba7c, step as u64]);
    let mut batch = Vec::with_capacity(cfg.batch_size);
    for _ in 0..cfg.batch_size {
        let cat = sample_category(cfg, &mut rng).to_string();
        let pool = &sets.pools[&cat];
        let rec = &pool[rng.gen_range(0..pool.len())];
        batch.push(build_item(rec, cfg.stage, cfg, model_cfg, vocab, &sets.artifacts, &mut rng)?);
    }
    Ok(batch)
}
