//! Mixed-representation sequence assembly.
//!
//! Token order: `[image patches | prompt words + control tag | proprio bins
//! | CE-supervised target tokens (discrete actions or text, ending in EOS) |
//! continuous noisy-action rows]`. The first three segments form the prefix;
//! target tokens and noisy rows are the two suffix flavors.

use crate::mat::Mat;
use crate::model::config::ModelConfig;
use crate::text::{TextVocab, PROPRIO_BINS};
use crate::world::render::Image;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Prefix,
    FastTarget,
    TextTarget,
    NoisyAction,
}

/// Continuous suffix for flow-matching supervision/inference.
#[derive(Debug, Clone)]
pub struct FlowSuffix {
    /// Interpolated noisy chunk, horizon x d_max.
    pub noisy: Mat,
    /// Regression target (noise minus clean action); zero rows at inference.
    pub target_u: Mat,
    pub tau: f64,
}

#[derive(Debug, Clone)]
pub struct MixedSequence {
    /// Flattened patch vectors, each `patch*patch*3` long.
    pub patches: Vec<Vec<f64>>,
    /// Prompt + control tag + proprio tokens.
    pub prefix_tokens: Vec<u32>,
    /// CE-supervised tokens (ends with EOS when non-empty).
    pub target_tokens: Vec<u32>,
    pub target_role: Role,
    pub flow: Option<FlowSuffix>,
}

impl MixedSequence {
    pub fn prefix_len(&self) -> usize {
        self.patches.len() + self.prefix_tokens.len()
    }

    pub fn len(&self) -> usize {
        self.prefix_len()
            + self.target_tokens.len()
            + self.flow.as_ref().map_or(0, |f| f.noisy.rows)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn roles(&self) -> Vec<Role> {
        let mut r = vec![Role::Prefix; self.prefix_len()];
        r.extend(std::iter::repeat(self.target_role).take(self.target_tokens.len()));
        if let Some(f) = &self.flow {
            r.extend(std::iter::repeat(Role::NoisyAction).take(f.noisy.rows));
        }
        r
    }
}

/// What the CE-supervised suffix carries.
#[derive(Debug, Clone)]
pub enum SeqTarget {
    /// Global token ids of a discrete action encoding.
    Fast(Vec<u32>),
    /// Text (subtask label or answer), optionally followed by a location box
    /// encoded as four location tokens.
    Text(String, Option<[u8; 4]>),
    None,
}

/// Split an image into non-overlapping `patch x patch` RGB patches,
/// row-major over the patch grid, each flattened row-major.
pub fn patchify(img: &Image, patch: usize) -> Vec<Vec<f64>> {
    assert_eq!(img.h % patch, 0);
    assert_eq!(img.w % patch, 0);
    let mut out = Vec::with_capacity((img.h / patch) * (img.w / patch));
    for py in 0..img.h / patch {
        for px in 0..img.w / patch {
            let mut v = Vec::with_capacity(patch * patch * 3);
            for dy in 0..patch {
                for dx in 0..patch {
                    let rgb = img.get(py * patch + dy, px * patch + dx);
                    v.extend(rgb.iter().map(|&c| c as f64));
                }
            }
            out.push(v);
        }
    }
    out
}

/// Map a value in [-1, 1] to one of `bins` indices: floor(bins*(v+1)/2),
/// clamped to the valid range.
pub fn discretize_proprio(v: f64, bins: usize) -> usize {
    let raw = (bins as f64 * (v + 1.0) / 2.0).floor();
    raw.clamp(0.0, (bins - 1) as f64) as usize
}

/// Assemble the full mixed sequence for one example.
///
/// `images` may have fewer entries than the configured camera count (e.g.
/// single-view web data); missing cameras are zero frames. `proprio` is
/// zero-padded to `d_max` slots.
pub fn build_sequence(
    cfg: &ModelConfig,
    vocab: &TextVocab,
    images: &[Image],
    prompt: &str,
    control_mode: &str,
    proprio: &[f64],
    target: SeqTarget,
    flow: Option<FlowSuffix>,
) -> Result<MixedSequence> {
    if images.len() > cfg.n_cameras {
        return Err(Error::DimMismatch {
            context: "camera count",
            expected: cfg.n_cameras,
            got: images.len(),
        });
    }
    if proprio.len() > cfg.d_max {
        return Err(Error::DimMismatch {
            context: "proprio dims",
            expected: cfg.d_max,
            got: proprio.len(),
        });
    }
    let mut patches = Vec::with_capacity(cfg.n_patches());
    let blank = Image::filled(cfg.img_size, cfg.img_size, [0.0; 3]);
    for ci in 0..cfg.n_cameras {
        let img = images.get(ci).unwrap_or(&blank);
        if img.h != cfg.img_size || img.w != cfg.img_size {
            return Err(Error::DimMismatch {
                context: "image size",
                expected: cfg.img_size,
                got: img.h,
            });
        }
        patches.extend(patchify(img, cfg.patch));
    }

    let mut prefix_tokens = vocab.encode(prompt)?;
    prefix_tokens.extend(vocab.encode(&format!("<control_mode> {control_mode}"))?);
    for i in 0..cfg.d_max {
        let v = proprio.get(i).copied().unwrap_or(0.0);
        if !v.is_finite() {
            return Err(Error::NonFinite("proprio"));
        }
        prefix_tokens.push(vocab.proprio_token(discretize_proprio(v, PROPRIO_BINS)));
    }

    let (target_tokens, target_role) = match target {
        SeqTarget::Fast(mut ids) => {
            ids.push(crate::text::EOS);
            (ids, Role::FastTarget)
        }
        SeqTarget::Text(s, box_bins) => {
            let mut ids = vocab.encode(&s)?;
            if let Some(b) = box_bins {
                for v in b {
                    ids.push(vocab.loc_token(v as usize));
                }
            }
            ids.push(crate::text::EOS);
            (ids, Role::TextTarget)
        }
        SeqTarget::None => (Vec::new(), Role::TextTarget),
    };

    if let Some(f) = &flow {
        if f.noisy.rows != cfg.horizon || f.noisy.cols != cfg.d_max {
            return Err(Error::HorizonMismatch {
                expected: cfg.horizon,
                got: f.noisy.rows,
            });
        }
        if f.target_u.rows != cfg.horizon || f.target_u.cols != cfg.d_max {
            return Err(Error::HorizonMismatch {
                expected: cfg.horizon,
                got: f.target_u.rows,
            });
        }
        if !(0.0..1.0).contains(&f.tau) {
            return Err(Error::InvalidConfig(format!("tau {} outside [0,1)", f.tau)));
        }
    }

    Ok(MixedSequence {
        patches,
        prefix_tokens,
        target_tokens,
        target_role,
        flow,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ModelConfig {
        ModelConfig::desk()
    }

    #[test]
    fn patchify_covers_image_in_reading_order() {
        let mut img = Image::filled(16, 16, [0.0; 3]);
        // Mark pixel (y=4, x=8): patch row 1, patch col 2 -> patch idx 6,
        // local (0,0) -> first 3 values.
        img.set(4, 8, [0.5, 0.25, 0.125]);
        let p = patchify(&img, 4);
        assert_eq!(p.len(), 16);
        assert_eq!(p[6][0], 0.5);
        assert_eq!(p[6][1], 0.25);
        assert_eq!(p[6][2], 0.125);
        // Total energy preserved.
        let total: f64 = p.iter().flatten().sum();
        assert!((total - 0.875).abs() < 1e-12);
        assert!(p.iter().all(|v| v.len() == 48));
    }

    #[test]
    fn proprio_discretization_matches_formula() {
        // floor(bins*(v+1)/2) with clamping at both ends.
        assert_eq!(discretize_proprio(-1.0, 64), 0);
        assert_eq!(discretize_proprio(1.0, 64), 63); // clamped from 64
        assert_eq!(discretize_proprio(0.0, 64), 32);
        assert_eq!(discretize_proprio(-1.5, 64), 0);
        assert_eq!(discretize_proprio(2.0, 64), 63);
        // Brute-force oracle over a grid.
        for i in 0..=200 {
            let v = -1.0 + 2.0 * i as f64 / 200.0;
            let want = ((64.0 * (v + 1.0) / 2.0).floor()).clamp(0.0, 63.0) as usize;
            assert_eq!(discretize_proprio(v, 64), want);
        }
    }

    #[test]
    fn sequence_layout_matches_segment_arithmetic() {
        // Two 16-patch cameras, a 5-token prompt segment (3 words + 2-token
        // control tag), 7 proprio slots, and a 3-token target block:
        // 32 + 5 + 7 + 3 = 47 positions.
        let c = cfg();
        let vocab = TextVocab::new();
        let img = Image::filled(16, 16, [0.1; 3]);
        let seq = build_sequence(
            &c,
            &vocab,
            &[img.clone(), img],
            "make the bed",
            "joint",
            &[0.0; 7],
            SeqTarget::Fast(vec![
                vocab.action_token(0),
                vocab.action_token(5),
            ]),
            None,
        )
        .unwrap();
        assert_eq!(seq.patches.len(), 2 * 16);
        assert_eq!(seq.prefix_tokens.len(), 3 + 2 + 7);
        assert_eq!(seq.target_tokens.len(), 2 + 1); // + EOS
        let expected = 2 * 16 + (3 + 2) + 7 + 3;
        assert_eq!(expected, 47);
        assert_eq!(seq.len(), expected);
        assert_eq!(seq.prefix_len(), 44);
        // Roles: prefix everywhere, then the discrete-action targets.
        let roles = seq.roles();
        assert!(roles[..44].iter().all(|&r| r == Role::Prefix));
        assert!(roles[44..].iter().all(|&r| r == Role::FastTarget));
    }

    #[test]
    fn text_targets_carry_box_tokens_and_eos() {
        let c = cfg();
        let vocab = TextVocab::new();
        let seq = build_sequence(
            &c,
            &vocab,
            &[],
            "where is the sock",
            "none",
            &[],
            SeqTarget::Text("the teal sock".into(), Some([1, 2, 3, 4])),
            None,
        )
        .unwrap();
        assert_eq!(seq.target_role, Role::TextTarget);
        let t = &seq.target_tokens;
        assert_eq!(t.len(), 3 + 4 + 1);
        assert_eq!(t[3], vocab.loc_token(1));
        assert_eq!(t[6], vocab.loc_token(4));
        assert_eq!(*t.last().unwrap(), crate::text::EOS);
        // Missing cameras become zero frames but still occupy patch slots.
        assert_eq!(seq.patches.len(), c.n_patches());
        assert!(seq.patches.iter().all(|p| p.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn flow_suffix_is_validated() {
        let c = cfg();
        let vocab = TextVocab::new();
        let ok = FlowSuffix {
            noisy: Mat::zeros(8, 7),
            target_u: Mat::zeros(8, 7),
            tau: 0.25,
        };
        let seq = build_sequence(
            &c, &vocab, &[], "make the bed", "joint", &[0.0; 7],
            SeqTarget::None, Some(ok.clone()),
        )
        .unwrap();
        assert_eq!(seq.len(), seq.prefix_len() + 8);
        assert_eq!(seq.roles()[seq.prefix_len()], Role::NoisyAction);

        let bad_h = FlowSuffix { noisy: Mat::zeros(5, 7), ..ok.clone() };
        assert!(build_sequence(
            &c, &vocab, &[], "make the bed", "joint", &[],
            SeqTarget::None, Some(bad_h),
        )
        .is_err());
        let bad_tau = FlowSuffix { tau: 1.0, ..ok };
        assert!(build_sequence(
            &c, &vocab, &[], "make the bed", "joint", &[],
            SeqTarget::None, Some(bad_tau),
        )
        .is_err());
    }

    #[test]
    fn oversized_inputs_are_rejected() {
        let c = cfg();
        let vocab = TextVocab::new();
        let img = Image::filled(16, 16, [0.0; 3]);
        assert!(build_sequence(
            &c, &vocab,
            &[img.clone(), img.clone(), img.clone()],
            "make the bed", "joint", &[], SeqTarget::None, None,
        )
        .is_err());
        assert!(build_sequence(
            &c, &vocab, &[], "make the bed", "joint", &[0.0; 8],
            SeqTarget::None, None,
        )
        .is_err());
        assert!(build_sequence(
            &c, &vocab, &[], "make the bed", "joint", &[f64::NAN],
            SeqTarget::None, None,
        )
        .is_err());
    }
}
