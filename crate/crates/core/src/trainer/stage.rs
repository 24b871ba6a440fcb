//! Stage execution: the deterministic train loop tying mixture sampling,
//! the combined loss, and the optimizer together, with per-step metrics.
//!
//! Pre-training runs the backbone alone (the model must not yet carry an
//! action expert); post-training attaches a freshly initialized action
//! expert before the first step and trains the joint objective.

use std::io::Write as _;
use std::path::Path;

use crate::model::forward::TwoExpertModel;
use crate::text::TextVocab;
use crate::trainer::loss::combined_loss_and_grads;
use crate::trainer::mixture::{check_pools, sample_batch, MixtureConfig, Stage, TrainSets};
use crate::trainer::optim::{AdamW, OptimConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    pub step: usize,
    pub ce_loss: f64,
    pub flow_loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Default)]
pub struct StageReport {
    pub metrics: Vec<StepMetrics>,
    pub warnings: Vec<String>,
}

impl StageReport {
    pub fn final_ce(&self) -> Option<f64> {
        self.metrics.last().map(|m| m.ce_loss)
    }

    /// Mean CE over consecutive windows (trend diagnostics).
    pub fn ce_windows(&self, window: usize) -> Vec<f64> {
        assert!(window > 0);
        self.metrics
            .chunks(window)
            .map(|c| c.iter().map(|m| m.ce_loss).sum::<f64>() / c.len() as f64)
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        writeln!(f, "step,ce_loss,flow_loss,lr")?;
        for m in &self.metrics {
            writeln!(f, "{},{},{},{}", m.step, m.ce_loss, m.flow_loss, m.lr)?;
        }
        Ok(())
    }
}

/// Seed tag for the fresh action expert attached at post-training start.
const EXPERT_SEED_TAG: u64 = 0xe8_9e27;

/// Run one training stage over the prepared pools. The model is updated in
/// place; the returned optimizer carries final moment state for
/// checkpointing.
pub fn run_stage(
    model: &mut TwoExpertModel,
    sets: &TrainSets,
    cfg: &MixtureConfig,
    vocab: &TextVocab,
) -> Result<(StageReport, AdamW)> {
    let warnings = cfg.validate()?;
    check_pools(cfg, sets)?;
    match cfg.stage {
        Stage::Pretrain => {
            if model.has_action_expert {
                return Err(Error::InvalidConfig(
                    "pre-training expects a backbone-only model".into(),
                ));
            }
        }
        Stage::Posttrain => {
            if !model.has_action_expert {
                model.add_action_expert(crate::seeding::child_seed(
                    cfg.seed,
                    &[EXPERT_SEED_TAG],
                ));
            }
        }
    }

    let opt_cfg = OptimConfig {
        total_steps: cfg.steps.max(1),
        ..cfg.optim.clone()
    };
    let mut opt = AdamW::new(&model.params, opt_cfg);
    let mut report = StageReport {
        metrics: Vec::with_capacity(cfg.steps),
        warnings,
    };
    for step in 0..cfg.steps {
        let batch = sample_batch(sets, cfg, &model.config, vocab, step)?;
        let seqs: Vec<_> = batch.into_iter().map(|b| b.seq).collect();
        let (metrics, grads) = combined_loss_and_grads(model, &seqs, cfg.alpha)?;
        let lr = opt.step(&mut model.params, &grads);
        report.metrics.push(StepMetrics {
            step,
            ce_loss: metrics.ce_loss,
            flow_loss: metrics.flow_loss,
            lr,
        });
    }
    Ok((report, opt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::ModelConfig;
    use crate::trainer::mixture::{fit_codec, prepare_sets};
    use crate::world::dataset::{generate_dataset, GenConfig};

    fn toy_setup(stage: Stage) -> (TwoExpertModel, TrainSets, TextVocab, ModelConfig) {
        let gen = GenConfig {
            seed: 5,
            envs: (0..2).collect(),
            mm_seeds_per_task: 1,
            me_seeds_per_task: 1,
            lab_count: 6,
            web_count: 24,
            vi_rollouts: 3,
            vi_noise: 0.25,
        };
        let (records, _) = generate_dataset(&gen).unwrap();
        let cfg = ModelConfig::desk();
        let vocab = TextVocab::new();
        let arts = fit_codec(&records, cfg.d_max, cfg.fast_tokens).unwrap();
        let sets = prepare_sets(&records, stage, 0.95, arts);
        let model =
            TwoExpertModel::new_backbone(cfg.clone(), vocab.vocab_size_with(cfg.fast_tokens))
                .unwrap();
        (model, sets, vocab, cfg)
    }

    #[test]
    fn zero_steps_leaves_parameters_untouched() {
        let (mut model, sets, vocab, _) = toy_setup(Stage::Pretrain);
        let before: Vec<Vec<u64>> = model
            .params
            .mats
            .iter()
            .map(|m| m.data.iter().map(|v| v.to_bits()).collect())
            .collect();
        let mut cfg = MixtureConfig::pretrain_default(1);
        cfg.steps = 0;
        let (report, _) = run_stage(&mut model, &sets, &cfg, &vocab).unwrap();
        assert!(report.metrics.is_empty());
        for (m, b) in model.params.mats.iter().zip(&before) {
            assert!(m.data.iter().map(|v| v.to_bits()).eq(b.iter().copied()));
        }
    }

    #[test]
    fn pretrain_rejects_model_with_expert_attached() {
        let (mut model, sets, vocab, _) = toy_setup(Stage::Pretrain);
        model.add_action_expert(4);
        let mut cfg = MixtureConfig::pretrain_default(1);
        cfg.steps = 1;
        assert!(run_stage(&mut model, &sets, &cfg, &vocab).is_err());
    }

    #[test]
    fn posttrain_attaches_fresh_expert_parameters() {
        let (mut model, sets, vocab, _) = toy_setup(Stage::Posttrain);
        assert!(!model.params.contains("act.out.w"));
        let mut cfg = MixtureConfig::posttrain_default(2);
        cfg.steps = 1;
        cfg.batch_size = 4;
        let (report, _) = run_stage(&mut model, &sets, &cfg, &vocab).unwrap();
        assert!(model.has_action_expert);
        assert!(model.params.contains("act.out.w"));
        assert!(model.params.contains("time.w1"));
        assert_eq!(report.metrics.len(), 1);
        assert!(report.metrics[0].flow_loss >= 0.0);
    }

    #[test]
    fn short_pretrain_run_reduces_cross_entropy() {
        let (mut model, sets, vocab, _) = toy_setup(Stage::Pretrain);
        let mut cfg = MixtureConfig::pretrain_default(3);
        cfg.steps = 300;
        cfg.batch_size = 4;
        cfg.optim.warmup = 20;
        let (report, _) = run_stage(&mut model, &sets, &cfg, &vocab).unwrap();
        let first_ce = report.metrics[0].ce_loss;
        let windows = report.ce_windows(20);
        assert_eq!(windows.len(), 15);
        // Overall trend: every window beats the start and the final window
        // beats the first one decisively.
        for (i, w) in windows.iter().enumerate() {
            assert!(*w < first_ce, "window {i} mean {w} vs step-0 {first_ce}");
        }
        let (first_w, last_w) = (windows[0], *windows.last().unwrap());
        assert!(
            last_w < 0.6 * first_w,
            "final window {last_w} vs first {first_w}"
        );
        assert!(report.final_ce().unwrap() < first_ce);
    }

    #[test]
    fn single_batch_memorization_drives_ce_near_zero() {
        // Overfit sanity: repeatedly training on the same two records (no
        // augmentation) must drive CE below 0.01 within 500 steps.
        let (mut model, mut sets, vocab, _) = toy_setup(Stage::Pretrain);
        for (cat, pool) in sets.pools.iter_mut() {
            pool.truncate(1);
            let _ = cat;
        }
        sets.pools.retain(|k, _| k == "HL" || k == "MM");
        let mut cfg = MixtureConfig::pretrain_default(4);
        cfg.weights = [("HL".to_string(), 1.0), ("MM".to_string(), 1.0)]
            .into_iter()
            .collect();
        cfg.batch_size = 2;
        cfg.augment = false;
        cfg.steps = 500;
        cfg.optim.lr_max = 3e-3;
        cfg.optim.warmup = 20;
        let (report, _) = run_stage(&mut model, &sets, &cfg, &vocab).unwrap();
        let reached = report.metrics.iter().find(|m| m.ce_loss < 0.01);
        assert!(
            reached.is_some(),
            "CE floor not reached; final {}",
            report.final_ce().unwrap()
        );
    }
}
