//! Adam with decoupled weight decay and a warmup–cosine learning-rate
//! schedule. Gains, biases, and the token embedding are exempt from decay.
//! Moment state can be checkpointed to a small binary file.

use std::io::{Read as _, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::mat::Mat;
use crate::model::params::ParamSet;
use crate::{Error, Result};

const OPT_MAGIC: &[u8; 8] = b"DVLAOPT1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimConfig {
    pub lr_max: f64,
    pub lr_min: f64,
    pub warmup: usize,
    pub total_steps: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            lr_max: 3e-3,
            lr_min: 3e-4,
            warmup: 100,
            total_steps: 1000,
            beta1: 0.9,
            beta2: 0.95,
            eps: 1e-8,
            weight_decay: 1e-4,
        }
    }
}

/// Decay applies to weight matrices only, never to norm gains, biases, or
/// the embedding table.
pub fn decays(name: &str) -> bool {
    !(name.contains("norm") || name.ends_with(".b") || name == "embed.table")
}

#[derive(Debug)]
pub struct AdamW {
    pub cfg: OptimConfig,
    m: Vec<Mat>,
    v: Vec<Mat>,
    /// Steps taken (bias-correction time).
    pub t: usize,
    decay_mask: Vec<bool>,
}

impl AdamW {
    pub fn new(params: &ParamSet, cfg: OptimConfig) -> Self {
        AdamW {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
            decay_mask: params.names().iter().map(|n| decays(n)).collect(),
            cfg,
        }
    }

    /// Learning rate at 1-indexed step `t`: linear warmup to lr_max, then
    /// cosine decay to lr_min at total_steps.
    pub fn lr_at(&self, t: usize) -> f64 {
        let c = &self.cfg;
        if c.warmup > 0 && t <= c.warmup {
            return c.lr_max * t as f64 / c.warmup as f64;
        }
        if t >= c.total_steps {
            return c.lr_min;
        }
        let span = (c.total_steps - c.warmup) as f64;
        let progress = (t - c.warmup) as f64 / span;
        c.lr_min + 0.5 * (c.lr_max - c.lr_min) * (1.0 + (std::f64::consts::PI * progress).cos())
    }

    /// Persist moment state (full f64 precision) for exact resume.
    pub fn save_state(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(OPT_MAGIC);
        buf.extend_from_slice(&(self.t as u64).to_le_bytes());
        buf.extend_from_slice(&(self.m.len() as u32).to_le_bytes());
        for mats in [&self.m, &self.v] {
            for m in mats.iter() {
                buf.extend_from_slice(&(m.rows as u32).to_le_bytes());
                buf.extend_from_slice(&(m.cols as u32).to_le_bytes());
                for &x in &m.data {
                    buf.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        std::fs::File::create(path)?.write_all(&buf)?;
        Ok(())
    }

    /// Restore moment state saved by [`save_state`]; shapes must match the
    /// parameter set this optimizer was built for.
    pub fn load_state(&mut self, path: &Path) -> Result<()> {
        let mut raw = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut raw)?;
        let err = |m: &str| Error::CheckpointFormat(format!("optimizer state: {m}"));
        if raw.len() < 20 || &raw[..8] != OPT_MAGIC {
            return Err(err("bad header"));
        }
        let t = u64::from_le_bytes(raw[8..16].try_into().unwrap()) as usize;
        let n = u32::from_le_bytes(raw[16..20].try_into().unwrap()) as usize;
        if n != self.m.len() {
            return Err(err("parameter count mismatch"));
        }
        let mut pos = 20;
        let read_into = |mats: &mut Vec<Mat>, raw: &[u8]| -> Result<usize> {
            let mut pos_local = 0usize;
            for m in mats.iter_mut() {
                if pos_local + 8 > raw.len() {
                    return Err(err("truncated"));
                }
                let rows =
                    u32::from_le_bytes(raw[pos_local..pos_local + 4].try_into().unwrap()) as usize;
                let cols = u32::from_le_bytes(
                    raw[pos_local + 4..pos_local + 8].try_into().unwrap(),
                ) as usize;
                pos_local += 8;
                if rows != m.rows || cols != m.cols {
                    return Err(err("shape mismatch"));
                }
                let need = rows * cols * 8;
                if pos_local + need > raw.len() {
                    return Err(err("truncated"));
                }
                for (i, ch) in raw[pos_local..pos_local + need].chunks_exact(8).enumerate() {
                    m.data[i] = f64::from_le_bytes(ch.try_into().unwrap());
                }
                pos_local += need;
            }
            Ok(pos_local)
        };
        pos += read_into(&mut self.m, &raw[pos..])?;
        pos += read_into(&mut self.v, &raw[pos..])?;
        if pos != raw.len() {
            return Err(err("trailing bytes"));
        }
        self.t = t;
        Ok(())
    }

    /// One update over all parameters; returns the learning rate used.
    pub fn step(&mut self, params: &mut ParamSet, grads: &[Mat]) -> f64 {
        assert_eq!(grads.len(), params.len(), "gradient count mismatch");
        self.t += 1;
        let lr = self.lr_at(self.t);
        let c = self.cfg.clone();
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        for p in 0..params.len() {
            let g = &grads[p];
            let theta = &mut params.mats[p];
            assert_eq!(g.data.len(), theta.data.len(), "gradient shape mismatch");
            let wd = if self.decay_mask[p] { c.weight_decay } else { 0.0 };
            let m = &mut self.m[p];
            let v = &mut self.v[p];
            for i in 0..theta.data.len() {
                let gi = g.data[i];
                m.data[i] = c.beta1 * m.data[i] + (1.0 - c.beta1) * gi;
                v.data[i] = c.beta2 * v.data[i] + (1.0 - c.beta2) * gi * gi;
                let mh = m.data[i] / bc1;
                let vh = v.data[i] / bc2;
                theta.data[i] -= lr * (mh / (vh.sqrt() + c.eps) + wd * theta.data[i]);
            }
        }
        lr
    }
}
