//! Continuous action chunks and their two interchangeable encodings.
//!
//! A chunk is an `H x d` matrix of continuous controls. Chunks are first
//! mapped into `[-1, 1]` per dimension using robust dataset quantiles and
//! zero-padded to a shared maximum dimension so several embodiments can be
//! trained by one model. The discrete path ([`vocab`]) turns a normalized
//! chunk into a short token string: an orthonormal cosine transform per
//! dimension, uniform quantization of the kept coefficients, a
//! low-frequency-first interleave, then greedy learned pair merges. The
//! inverse path decodes tokens back to a chunk within a configured
//! reconstruction tolerance.

mod dct;
mod norm;
mod vocab;

pub use dct::{dct_forward, dct_inverse};
pub use norm::{fit_normalizer, pad_actions, unpad_actions, ActionChunk, NormStats};
pub use vocab::{
    decode_fast, encode_fast, train_fast_vocab, FastVocab, VocabTrainConfig, COEFF_RANGE,
};
