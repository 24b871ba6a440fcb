//! Deterministic substream derivation.
//!
//! Every random draw in the crate comes from a `ChaCha8Rng` seeded through
//! this module, so a single master seed pins datasets, initialization,
//! training batches, and evaluation rollouts. Substreams are derived by
//! mixing tag words into the master seed with splitmix64 steps, which keeps
//! streams for different purposes statistically independent without any
//! global state.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One splitmix64 scramble round.
#[inline]
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a master seed with a sequence of tag words into a single child seed.
pub fn child_seed(master: u64, tags: &[u64]) -> u64 {
    let mut s = splitmix64(master);
    for &t in tags {
        s = splitmix64(s ^ t);
    }
    s
}

/// Deterministic RNG for the substream identified by `tags`.
pub fn rng(master: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(child_seed(master, tags))
}

/// FNV-1a over bytes; used for stable content hashes (configs, manifests).
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Stable hex content hash of a serialized config.
pub fn content_hash(bytes: &[u8]) -> String {
    // Two passes with different suffixes widen FNV-1a to 128 bits, which is
    // plenty for config-identity checks (not for adversarial collision
    // resistance, which nothing here needs).
    let a = fnv1a(bytes);
    let mut salted = bytes.to_vec();
    salted.push(0x55);
    let b = fnv1a(&salted);
    format!("{a:016x}{b:016x}")
}
