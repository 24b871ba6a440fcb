//! Model hyperparameters.
//!
//! The desk preset is sized so the full train/evaluate loop runs on one CPU
//! core; the reference preset records the published large-scale shape and is
//! exercised for construction math only, never trained in tests.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Backbone residual width.
    pub width: usize,
    pub depth: usize,
    pub heads: usize,
    pub head_dim: usize,
    pub mlp_dim: usize,
    /// Action-expert residual width (smaller tower, shared attention).
    pub expert_width: usize,
    pub expert_mlp_dim: usize,
    /// Width of the denoising-time conditioning features/MLP.
    pub timestep_width: usize,
    pub img_size: usize,
    pub patch: usize,
    pub n_cameras: usize,
    /// Action chunk length the model predicts.
    pub horizon: usize,
    /// Padded action dimension shared across embodiments.
    pub d_max: usize,
    pub denoise_steps: usize,
    /// Number of reserved discrete action-token ids.
    pub fast_tokens: usize,
    pub init_seed: u64,
}

impl ModelConfig {
    pub fn desk() -> Self {
        ModelConfig {
            width: 64,
            depth: 2,
            heads: 4,
            head_dim: 16,
            mlp_dim: 256,
            expert_width: 32,
            expert_mlp_dim: 128,
            timestep_width: 32,
            img_size: 16,
            patch: 4,
            n_cameras: 2,
            horizon: 8,
            d_max: 7,
            denoise_steps: 10,
            fast_tokens: 767,
            init_seed: 0,
        }
    }

    /// Published large-scale shape: a ~2B backbone with a ~300M action
    /// expert, 50-step chunks, three camera streams. Construction-checked
    /// only.
    pub fn reference() -> Self {
        ModelConfig {
            width: 2048,
            depth: 18,
            heads: 18,
            head_dim: 256,
            mlp_dim: 16384,
            expert_width: 1024,
            expert_mlp_dim: 4096,
            timestep_width: 256,
            img_size: 224,
            patch: 14,
            n_cameras: 3,
            horizon: 50,
            d_max: 32,
            denoise_steps: 10,
            fast_tokens: 767,
            init_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.img_size % self.patch != 0 {
            return Err(Error::InvalidConfig(format!(
                "patch {} must divide image size {}",
                self.patch, self.img_size
            )));
        }
        if self.timestep_width % 2 != 0 {
            return Err(Error::InvalidConfig(
                "timestep_width must be even (sin/cos pairs)".into(),
            ));
        }
        if self.heads == 0 || self.head_dim == 0 || self.width == 0 || self.expert_width == 0 {
            return Err(Error::InvalidConfig("zero-sized tower".into()));
        }
        if self.horizon == 0 || self.d_max == 0 {
            return Err(Error::InvalidConfig("empty action chunk".into()));
        }
        if self.denoise_steps < 2 {
            return Err(Error::InvalidConfig("need at least 2 denoising steps".into()));
        }
        Ok(())
    }

    pub fn patches_per_camera(&self) -> usize {
        let side = self.img_size / self.patch;
        side * side
    }

    pub fn n_patches(&self) -> usize {
        self.patches_per_camera() * self.n_cameras
    }

    /// Attention inner width (shared across both towers).
    pub fn attn_dim(&self) -> usize {
        self.heads * self.head_dim
    }

    /// Stable hash of the canonical JSON encoding, used to refuse loading
    /// checkpoints into mismatched architectures.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        crate::seeding::content_hash(json.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_preset_is_valid_and_hash_is_stable() {
        let c = ModelConfig::desk();
        c.validate().unwrap();
        assert_eq!(c.n_patches(), 32);
        assert_eq!(c.attn_dim(), 64);
        let h1 = c.hash();
        let h2 = ModelConfig::desk().hash();
        assert_eq!(h1, h2);
        let mut c2 = ModelConfig::desk();
        c2.depth = 3;
        assert_ne!(h1, c2.hash());
    }

    #[test]
    fn reference_preset_records_published_shape() {
        let r = ModelConfig::reference();
        r.validate().unwrap();
        assert_eq!(r.width, 2048);
        assert_eq!(r.depth, 18);
        assert_eq!(r.mlp_dim, 16384);
        assert_eq!(r.heads, 18);
        assert_eq!(r.head_dim, 256);
        assert_eq!(r.expert_width, 1024);
        assert_eq!(r.expert_mlp_dim, 4096);
        assert_eq!(r.horizon, 50);
        assert_eq!(r.patches_per_camera(), 256);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = ModelConfig::desk();
        c.patch = 5;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::desk();
        c.timestep_width = 31;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::desk();
        c.denoise_steps = 1;
        assert!(c.validate().is_err());
    }
}
