//! Discrete action tokens: transform, quantize, interleave, merge.
//!
//! Encoding a normalized `H x d` chunk:
//! 1. per dimension, take the orthonormal cosine transform over the horizon
//!    and keep the first `k` coefficients;
//! 2. quantize each kept coefficient with a symmetric midtread uniform
//!    quantizer over `[-COEFF_RANGE, COEFF_RANGE]` (zero is always a
//!    reconstruction level by construction);
//! 3. interleave dimensions low-frequency-first (coefficient 0 of every
//!    dimension, then coefficient 1 of every dimension, ...);
//! 4. greedily replace learned symbol pairs with merged tokens, in the
//!    order the merges were learned.
//!
//! Decoding inverts each step; the reconstruction error of a band-limited
//! chunk is bounded by the quantizer half-step propagated through the
//! orthonormal inverse transform: per-coefficient error <= step/2, so the
//! l2 (and hence max-abs) time-domain error per dimension is at most
//! `sqrt(k) * step / 2`.

use serde::{Deserialize, Serialize};

use super::dct::{dct_forward, dct_inverse};
use super::norm::ActionChunk;
use crate::{Error, Result};

/// Coefficient range covered by the quantizer. An orthonormal transform of a
/// `[-1, 1]` signal of length `H` has coefficients bounded by `sqrt(H)`, so
/// this covers horizons up to 16 without clipping.
pub const COEFF_RANGE: f64 = 4.0;

pub const FAST_VOCAB_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy)]
pub struct VocabTrainConfig {
    /// Requested quantizer level count; rounded down to the nearest odd
    /// count `2L + 1` so zero stays a reconstruction level. Must be >= 2.
    pub levels: usize,
    /// Kept leading coefficients per dimension; `None` keeps all (lossless
    /// up to quantization).
    pub k: Option<usize>,
    /// Maximum number of learned pair merges.
    pub max_merges: usize,
}

impl Default for VocabTrainConfig {
    fn default() -> Self {
        VocabTrainConfig {
            levels: 255,
            k: None,
            max_merges: 512,
        }
    }
}

/// Trained discrete action vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FastVocab {
    pub version: u32,
    pub horizon: usize,
    pub dim: usize,
    /// Kept coefficients per dimension.
    pub k: usize,
    /// Half-width of the symmetric quantizer index range; levels = 2L + 1.
    pub half_levels: usize,
    pub coeff_range: f64,
    /// Learned merges in training order; rule `i` maps the adjacent pair
    /// `(a, b)` to token id `base_symbols() + i`.
    pub merges: Vec<(u32, u32)>,
}

impl FastVocab {
    /// Number of base (quantizer-level) symbols.
    pub fn base_symbols(&self) -> usize {
        2 * self.half_levels + 1
    }

    /// Total token id range: base symbols plus one id per merge.
    pub fn token_count(&self) -> usize {
        self.base_symbols() + self.merges.len()
    }

    /// Quantizer step between reconstruction levels.
    pub fn step(&self) -> f64 {
        self.coeff_range / self.half_levels as f64
    }

    /// Max-abs reconstruction error bound for a chunk whose per-dimension
    /// spectrum is supported on the kept coefficients.
    pub fn half_step_bound(&self) -> f64 {
        (self.k as f64).sqrt() * self.step() / 2.0
    }

    #[inline]
    fn quantize(&self, v: f64) -> u32 {
        let l = self.half_levels as i64;
        let q = (v / self.step()).round() as i64;
        (q.clamp(-l, l) + l) as u32
    }

    #[inline]
    fn dequantize(&self, sym: u32) -> f64 {
        (sym as i64 - self.half_levels as i64) as f64 * self.step()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("FastVocab serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let v: FastVocab = serde_json::from_str(s)?;
        if v.version != FAST_VOCAB_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported FastVocab version {}",
                v.version
            )));
        }
        for (i, &(a, b)) in v.merges.iter().enumerate() {
            let limit = (v.base_symbols() + i) as u32;
            if a >= limit || b >= limit {
                return Err(Error::InvalidConfig(format!(
                    "merge rule {i} references undefined symbol"
                )));
            }
        }
        Ok(v)
    }
}

/// Quantized, interleaved base-symbol stream of one chunk (before merges).
fn base_stream(vocab: &FastVocab, chunk: &ActionChunk) -> Vec<u32> {
    let mut per_dim: Vec<Vec<f64>> = Vec::with_capacity(chunk.dim);
    let mut col = vec![0.0; chunk.horizon];
    for d in 0..chunk.dim {
        for t in 0..chunk.horizon {
            col[t] = chunk.get(t, d);
        }
        per_dim.push(dct_forward(&col, vocab.k));
    }
    let mut stream = Vec::with_capacity(vocab.k * chunk.dim);
    for f in 0..vocab.k {
        for coeffs in &per_dim {
            stream.push(vocab.quantize(coeffs[f]));
        }
    }
    stream
}

/// Replace non-overlapping occurrences of `(a, b)` left-to-right with `id`.
fn apply_merge(stream: &[u32], a: u32, b: u32, id: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(stream.len());
    let mut i = 0;
    while i < stream.len() {
        if i + 1 < stream.len() && stream[i] == a && stream[i + 1] == b {
            out.push(id);
            i += 2;
        } else {
            out.push(stream[i]);
            i += 1;
        }
    }
    out
}

/// Learn up to `max_merges` greedy pair merges over symbol streams.
///
/// At each round, adjacent-pair counts are aggregated over all streams, the
/// most frequent pair wins (ties break to the lexicographically smallest
/// pair), and every stream is rewritten. Stops early when no adjacent pair
/// remains.
pub fn train_merges(streams: &mut [Vec<u32>], base: u32, max_merges: usize) -> Vec<(u32, u32)> {
    let mut merges = Vec::new();
    for round in 0..max_merges {
        let mut best: Option<((u32, u32), usize)> = None;
        let mut counts: std::collections::HashMap<(u32, u32), usize> =
            std::collections::HashMap::new();
        for s in streams.iter() {
            for w in s.windows(2) {
                *counts.entry((w[0], w[1])).or_insert(0) += 1;
            }
        }
        for (&pair, &count) in counts.iter() {
            let better = match best {
                None => true,
                Some((bp, bc)) => count > bc || (count == bc && pair < bp),
            };
            if better {
                best = Some((pair, count));
            }
        }
        let Some(((a, b), _)) = best else { break };
        let id = base + round as u32;
        for s in streams.iter_mut() {
            *s = apply_merge(s, a, b, id);
        }
        merges.push((a, b));
    }
    merges
}

/// Train the discrete action vocabulary on a corpus of normalized chunks.
///
/// All chunks must share the horizon and dimension; the resulting vocab is
/// deterministic in the corpus content and invariant to corpus order.
pub fn train_fast_vocab(corpus: &[ActionChunk], cfg: VocabTrainConfig) -> Result<FastVocab> {
    if corpus.is_empty() {
        return Err(Error::EmptyInput("train_fast_vocab corpus"));
    }
    if cfg.levels < 2 {
        return Err(Error::InvalidConfig(format!(
            "quantizer levels must be >= 2, got {}",
            cfg.levels
        )));
    }
    let horizon = corpus[0].horizon;
    let dim = corpus[0].dim;
    let k = cfg.k.unwrap_or(horizon);
    if k == 0 || k > horizon {
        return Err(Error::InvalidConfig(format!(
            "kept coefficients k={k} out of range 1..={horizon}"
        )));
    }
    let mut vocab = FastVocab {
        version: FAST_VOCAB_VERSION,
        horizon,
        dim,
        k,
        half_levels: ((cfg.levels - 1) / 2).max(1),
        coeff_range: COEFF_RANGE,
        merges: Vec::new(),
    };
    let mut streams = Vec::with_capacity(corpus.len());
    for c in corpus {
        if c.horizon != horizon {
            return Err(Error::HorizonMismatch {
                expected: horizon,
                got: c.horizon,
            });
        }
        if c.dim != dim {
            return Err(Error::DimMismatch {
                context: "train_fast_vocab: chunk dims inconsistent",
                expected: dim,
                got: c.dim,
            });
        }
        if !c.is_normalized {
            return Err(Error::InvalidConfig(
                "train_fast_vocab requires normalized chunks".into(),
            ));
        }
        streams.push(base_stream(&vocab, c));
    }
    vocab.merges = train_merges(&mut streams, vocab.base_symbols() as u32, cfg.max_merges);
    Ok(vocab)
}

/// Encode one normalized chunk into token ids.
pub fn encode_fast(vocab: &FastVocab, chunk: &ActionChunk) -> Result<Vec<u32>> {
    if !chunk.is_normalized {
        return Err(Error::InvalidConfig(
            "encode_fast requires a normalized chunk".into(),
        ));
    }
    if chunk.horizon != vocab.horizon {
        return Err(Error::HorizonMismatch {
            expected: vocab.horizon,
            got: chunk.horizon,
        });
    }
    if chunk.dim != vocab.dim {
        return Err(Error::DimMismatch {
            context: "encode_fast: chunk dim vs vocab dim",
            expected: vocab.dim,
            got: chunk.dim,
        });
    }
    let mut stream = base_stream(vocab, chunk);
    let base = vocab.base_symbols() as u32;
    for (i, &(a, b)) in vocab.merges.iter().enumerate() {
        stream = apply_merge(&stream, a, b, base + i as u32);
    }
    Ok(stream)
}

fn expand_symbol(vocab: &FastVocab, sym: u32, out: &mut Vec<u32>) {
    let base = vocab.base_symbols() as u32;
    if sym < base {
        out.push(sym);
    } else {
        let (a, b) = vocab.merges[(sym - base) as usize];
        expand_symbol(vocab, a, out);
        expand_symbol(vocab, b, out);
    }
}

/// Decode token ids back into a normalized chunk.
pub fn decode_fast(vocab: &FastVocab, tokens: &[u32]) -> Result<ActionChunk> {
    let mut symbols = Vec::with_capacity(vocab.k * vocab.dim);
    for &t in tokens {
        if t as usize >= vocab.token_count() {
            return Err(Error::TokenOutOfRange(t, vocab.token_count()));
        }
        expand_symbol(vocab, t, &mut symbols);
    }
    let expected = vocab.k * vocab.dim;
    if symbols.len() != expected {
        return Err(Error::DimMismatch {
            context: "decode_fast: expanded symbol count",
            expected,
            got: symbols.len(),
        });
    }
    let mut values = vec![0.0; vocab.horizon * vocab.dim];
    for d in 0..vocab.dim {
        let coeffs: Vec<f64> = (0..vocab.k)
            .map(|f| vocab.dequantize(symbols[f * vocab.dim + d]))
            .collect();
        let col = dct_inverse(&coeffs, vocab.horizon);
        for (t, &v) in col.iter().enumerate() {
            values[t * vocab.dim + d] = v;
        }
    }
    let mut chunk = ActionChunk::new(vocab.horizon, vocab.dim, values, "");
    chunk.is_normalized = true;
    Ok(chunk)
}
