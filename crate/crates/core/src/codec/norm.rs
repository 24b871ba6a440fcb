//! Robust normalization and dimension padding for action chunks.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A fixed-horizon window of continuous controls, row per timestep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionChunk {
    /// Row-major `horizon x dim` values.
    pub values: Vec<f64>,
    pub horizon: usize,
    pub dim: usize,
    pub is_normalized: bool,
    /// Free-form control-space tag carried into the text prompt.
    pub control_mode: String,
    /// Original dimension before zero-padding, if padded.
    pub padded_from: Option<usize>,
}

impl ActionChunk {
    pub fn new(horizon: usize, dim: usize, values: Vec<f64>, control_mode: &str) -> Self {
        assert_eq!(values.len(), horizon * dim, "chunk shape/values mismatch");
        ActionChunk {
            values,
            horizon,
            dim,
            is_normalized: false,
            control_mode: control_mode.to_string(),
            padded_from: None,
        }
    }

    #[inline]
    pub fn get(&self, t: usize, d: usize) -> f64 {
        self.values[t * self.dim + d]
    }

    #[inline]
    pub fn set(&mut self, t: usize, d: usize, v: f64) {
        self.values[t * self.dim + d] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Per-dimension robust range used for the affine map into `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub version: u32,
    pub q_low: Vec<f64>,
    pub q_high: Vec<f64>,
}

pub const NORM_STATS_VERSION: u32 = 1;
/// Quantile levels for the robust range.
pub const Q_LOW_P: f64 = 0.01;
pub const Q_HIGH_P: f64 = 0.99;

impl NormStats {
    pub fn dim(&self) -> usize {
        self.q_low.len()
    }

    /// Map one raw value of dimension `d` into `[-1, 1]` (clamped).
    #[inline]
    pub fn normalize_value(&self, d: usize, v: f64) -> f64 {
        let (lo, hi) = (self.q_low[d], self.q_high[d]);
        if hi <= lo {
            // Degenerate dimension: constant in the dataset; map to center.
            return 0.0;
        }
        (2.0 * (v - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0)
    }

    /// Inverse of [`normalize_value`] on the non-clamped range.
    #[inline]
    pub fn denormalize_value(&self, d: usize, v: f64) -> f64 {
        let (lo, hi) = (self.q_low[d], self.q_high[d]);
        if hi <= lo {
            return lo;
        }
        (v + 1.0) / 2.0 * (hi - lo) + lo
    }

    /// Normalize a whole chunk. The chunk dimension must match the stats.
    pub fn normalize(&self, chunk: &ActionChunk) -> Result<ActionChunk> {
        if chunk.dim != self.dim() {
            return Err(Error::DimMismatch {
                context: "normalize: chunk dim vs stats dim",
                expected: self.dim(),
                got: chunk.dim,
            });
        }
        if !chunk.is_finite() {
            return Err(Error::NonFinite("normalize input chunk"));
        }
        let mut out = chunk.clone();
        for t in 0..chunk.horizon {
            for d in 0..chunk.dim {
                out.set(t, d, self.normalize_value(d, chunk.get(t, d)));
            }
        }
        out.is_normalized = true;
        Ok(out)
    }

    pub fn denormalize(&self, chunk: &ActionChunk) -> Result<ActionChunk> {
        if chunk.dim != self.dim() {
            return Err(Error::DimMismatch {
                context: "denormalize: chunk dim vs stats dim",
                expected: self.dim(),
                got: chunk.dim,
            });
        }
        let mut out = chunk.clone();
        for t in 0..chunk.horizon {
            for d in 0..chunk.dim {
                out.set(t, d, self.denormalize_value(d, chunk.get(t, d)));
            }
        }
        out.is_normalized = false;
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("NormStats serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let stats: NormStats = serde_json::from_str(s)?;
        if stats.version != NORM_STATS_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported NormStats version {}",
                stats.version
            )));
        }
        if stats.q_low.len() != stats.q_high.len() {
            return Err(Error::InvalidConfig(
                "NormStats q_low/q_high length mismatch".into(),
            ));
        }
        Ok(stats)
    }
}

/// Empirical quantile with the linear-interpolation convention
/// `r = p * (n - 1)` over the sorted sample.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    debug_assert!(n > 0);
    let r = p * (n - 1) as f64;
    let lo = r.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = r - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Fit per-dimension 1%/99% quantile ranges over all timesteps of all chunks.
///
/// Errors on an empty corpus, on inconsistent dimensions, and on non-finite
/// values.
pub fn fit_normalizer(chunks: &[ActionChunk]) -> Result<NormStats> {
    if chunks.is_empty() || chunks.iter().all(|c| c.horizon == 0) {
        return Err(Error::EmptyInput("fit_normalizer corpus"));
    }
    let dim = chunks[0].dim;
    for c in chunks {
        if c.dim != dim {
            return Err(Error::DimMismatch {
                context: "fit_normalizer: chunk dims inconsistent",
                expected: dim,
                got: c.dim,
            });
        }
        if !c.is_finite() {
            return Err(Error::NonFinite("fit_normalizer corpus"));
        }
    }
    let mut q_low = Vec::with_capacity(dim);
    let mut q_high = Vec::with_capacity(dim);
    let mut pool: Vec<f64> = Vec::new();
    for d in 0..dim {
        pool.clear();
        for c in chunks {
            for t in 0..c.horizon {
                pool.push(c.get(t, d));
            }
        }
        pool.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
        q_low.push(quantile_sorted(&pool, Q_LOW_P));
        q_high.push(quantile_sorted(&pool, Q_HIGH_P));
    }
    Ok(NormStats {
        version: NORM_STATS_VERSION,
        q_low,
        q_high,
    })
}

/// Zero-pad a chunk's dimension axis up to `target_dim`, recording the
/// original width so [`unpad_actions`] can undo it.
pub fn pad_actions(chunk: &ActionChunk, target_dim: usize) -> Result<ActionChunk> {
    if target_dim < chunk.dim {
        return Err(Error::DimMismatch {
            context: "pad_actions: target below chunk dim",
            expected: chunk.dim,
            got: target_dim,
        });
    }
    if target_dim == chunk.dim {
        return Ok(chunk.clone());
    }
    let mut values = vec![0.0; chunk.horizon * target_dim];
    for t in 0..chunk.horizon {
        for d in 0..chunk.dim {
            values[t * target_dim + d] = chunk.get(t, d);
        }
    }
    Ok(ActionChunk {
        values,
        horizon: chunk.horizon,
        dim: target_dim,
        is_normalized: chunk.is_normalized,
        control_mode: chunk.control_mode.clone(),
        padded_from: Some(chunk.padded_from.unwrap_or(chunk.dim)),
    })
}

/// Drop the zero columns appended by [`pad_actions`].
pub fn unpad_actions(chunk: &ActionChunk) -> ActionChunk {
    let native = match chunk.padded_from {
        Some(d) if d < chunk.dim => d,
        _ => return chunk.clone(),
    };
    let mut values = vec![0.0; chunk.horizon * native];
    for t in 0..chunk.horizon {
        for d in 0..native {
            values[t * native + d] = chunk.get(t, d);
        }
    }
    ActionChunk {
        values,
        horizon: chunk.horizon,
        dim: native,
        is_normalized: chunk.is_normalized,
        control_mode: chunk.control_mode.clone(),
        padded_from: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Independent oracle: quantile by full sort + the interpolation formula,
    /// written separately from the production path.
    fn oracle_quantile(values: &[f64], p: f64) -> f64 {
        let mut v = values.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let r = p * (v.len() - 1) as f64;
        let lo = r.floor() as usize;
        let hi = r.ceil() as usize;
        v[lo] + (r - lo as f64) * (v[hi] - v[lo])
    }

    fn chunk_of_column(values: &[f64], horizon: usize) -> Vec<ActionChunk> {
        values
            .iter()
            .map(|&v| ActionChunk::new(horizon, 1, vec![v; horizon], "joint"))
            .collect()
    }

    #[test]
    fn enumerated_percentiles_match_hand_values() {
        // 101 chunks whose dimension-0 values enumerate 0.00..=1.00.
        let vals: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        for horizon in [1usize, 8] {
            let chunks = chunk_of_column(&vals, horizon);
            let stats = fit_normalizer(&chunks).unwrap();
            assert!((stats.q_low[0] - 0.01).abs() < 1e-12);
            assert!((stats.q_high[0] - 0.99).abs() < 1e-12);
        }
    }

    #[test]
    fn quantiles_match_brute_force_oracle_on_random_data() {
        let mut rng = crate::seeding::rng(11, &[1]);
        let vals: Vec<f64> = (0..100_000).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let chunks = chunk_of_column(&vals, 1);
        let stats = fit_normalizer(&chunks).unwrap();
        assert_eq!(stats.q_low[0], oracle_quantile(&vals, 0.01));
        assert_eq!(stats.q_high[0], oracle_quantile(&vals, 0.99));
    }

    #[test]
    fn normalize_endpoints_and_midpoint() {
        let stats = NormStats {
            version: NORM_STATS_VERSION,
            q_low: vec![2.0],
            q_high: vec![6.0],
        };
        assert_eq!(stats.normalize_value(0, 2.0), -1.0);
        assert_eq!(stats.normalize_value(0, 6.0), 1.0);
        assert_eq!(stats.normalize_value(0, 4.0), 0.0);
        // Outside the quantile range clamps.
        assert_eq!(stats.normalize_value(0, 100.0), 1.0);
        assert_eq!(stats.normalize_value(0, -100.0), -1.0);
    }

    #[test]
    fn degenerate_dimension_maps_to_zero() {
        let stats = NormStats {
            version: NORM_STATS_VERSION,
            q_low: vec![3.0],
            q_high: vec![3.0],
        };
        assert_eq!(stats.normalize_value(0, 3.0), 0.0);
        assert_eq!(stats.normalize_value(0, -7.0), 0.0);
    }

    #[test]
    fn round_trip_within_1e9_inside_range() {
        let mut rng = crate::seeding::rng(12, &[2]);
        let stats = NormStats {
            version: NORM_STATS_VERSION,
            q_low: vec![-0.7, 1.0, -3.0],
            q_high: vec![0.9, 4.0, 3.0],
        };
        for _ in 0..1000 {
            let vals: Vec<f64> = (0..3)
                .map(|d| rng.gen_range(stats.q_low[d]..stats.q_high[d]))
                .collect();
            let chunk = ActionChunk::new(1, 3, vals.clone(), "joint");
            let n = stats.normalize(&chunk).unwrap();
            assert!(n.is_normalized);
            let back = stats.denormalize(&n).unwrap();
            for d in 0..3 {
                assert!((back.get(0, d) - vals[d]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn fit_errors_on_empty_and_nan() {
        assert!(matches!(
            fit_normalizer(&[]),
            Err(Error::EmptyInput(_))
        ));
        let bad = ActionChunk::new(1, 1, vec![f64::NAN], "joint");
        assert!(matches!(
            fit_normalizer(&[bad]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn pad_appends_zero_columns_and_unpad_recovers() {
        let chunk = ActionChunk::new(2, 2, vec![1.0, 2.0, 3.0, 4.0], "joint");
        let padded = pad_actions(&chunk, 4).unwrap();
        assert_eq!(padded.dim, 4);
        assert_eq!(padded.padded_from, Some(2));
        assert_eq!(padded.get(0, 0), 1.0);
        assert_eq!(padded.get(0, 2), 0.0);
        assert_eq!(padded.get(1, 3), 0.0);
        // Original untouched.
        assert_eq!(chunk.values, vec![1.0, 2.0, 3.0, 4.0]);
        let back = unpad_actions(&padded);
        assert_eq!(back.values, chunk.values);
        assert_eq!(back.dim, 2);
        // Padding to the same dim is the identity.
        let same = pad_actions(&chunk, 2).unwrap();
        assert_eq!(same, chunk);
        // Target below current dim errors.
        assert!(pad_actions(&chunk, 1).is_err());
    }

    #[test]
    fn norm_stats_json_round_trip_is_exact() {
        let stats = NormStats {
            version: NORM_STATS_VERSION,
            q_low: vec![-0.123456789012345, 2.0],
            q_high: vec![0.987654321098765, 7.0],
        };
        let s = stats.to_json();
        let back = NormStats::from_json(&s).unwrap();
        assert_eq!(stats, back);
        assert_eq!(s, back.to_json(), "serialization is byte-stable");
    }
}
