//! Flow-matching sample construction and the thresholded timestep sampler.
//!
//! Training pairs a clean normalized action chunk `a` with Gaussian noise
//! `ω` at a sampled time `τ`: the network sees the interpolant
//! `τ·a + (1−τ)·ω` and must predict the constant velocity `u = ω − a`.
//! Times are drawn so that high-noise (low τ) regions dominate: with
//! `u ~ Beta(1.5, 1)`, `τ = s·(1 − u)` has density ∝ ((s−τ)/s)^(1/2) on
//! [0, s], and times above the threshold s are never sampled.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::codec::ActionChunk;
use crate::mat::Mat;
use crate::model::sequence::FlowSuffix;
use crate::{Error, Result};

/// Timestep threshold: τ is sampled from [0, s] and inference integrates
/// with step δ = 1/steps, which must exceed 1 − s.
pub const TAU_S: f64 = 0.999;
pub const TAU_BETA_ALPHA: f64 = 1.5;
pub const TAU_BETA_BETA: f64 = 1.0;

/// Draw τ = s·(1 − u), u ~ Beta(alpha, beta).
pub fn sample_tau(rng: &mut ChaCha8Rng, s: f64, alpha: f64, beta: f64) -> f64 {
    assert!(s > 0.0 && s <= 1.0, "threshold s must be in (0, 1]");
    let b = Beta::new(alpha, beta).expect("valid Beta parameters");
    let u: f64 = b.sample(rng);
    s * (1.0 - u)
}

/// Analytic CDF of the default sampler: F(τ) = 1 − ((s−τ)/s)^{1.5}.
pub fn tau_cdf(tau: f64, s: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    if tau >= s {
        return 1.0;
    }
    1.0 - ((s - tau) / s).powf(TAU_BETA_ALPHA)
}

/// One training example for the action expert.
#[derive(Debug, Clone)]
pub struct FlowSample {
    /// Clean normalized chunk (horizon x dim).
    pub clean: Mat,
    /// Standard-normal noise, same shape.
    pub omega: Mat,
    pub tau: f64,
    /// τ·clean + (1−τ)·omega.
    pub interpolant: Mat,
    /// omega − clean; independent of τ.
    pub target_u: Mat,
}

impl FlowSample {
    /// View as the model-input suffix.
    pub fn suffix(&self) -> FlowSuffix {
        FlowSuffix {
            noisy: self.interpolant.clone(),
            target_u: self.target_u.clone(),
            tau: self.tau,
        }
    }
}

/// Deterministic core: build the sample from given noise and time.
pub fn make_flow_sample_at(a: &ActionChunk, omega: Mat, tau: f64) -> Result<FlowSample> {
    if !a.is_finite() {
        return Err(Error::NonFinite("action chunk"));
    }
    if omega.rows != a.horizon || omega.cols != a.dim {
        return Err(Error::DimMismatch {
            context: "flow noise shape",
            expected: a.horizon * a.dim,
            got: omega.rows * omega.cols,
        });
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidConfig(format!("tau {tau} outside [0,1]")));
    }
    let clean = Mat::from_vec(a.horizon, a.dim, a.values.clone());
    let mut interpolant = Mat::zeros(a.horizon, a.dim);
    let mut target_u = Mat::zeros(a.horizon, a.dim);
    for i in 0..clean.data.len() {
        interpolant.data[i] = tau * clean.data[i] + (1.0 - tau) * omega.data[i];
        target_u.data[i] = omega.data[i] - clean.data[i];
    }
    Ok(FlowSample {
        clean,
        omega,
        tau,
        interpolant,
        target_u,
    })
}

/// Sample noise and time, then build the training example. `a` must already
/// be normalized (and padded to the shared action width by the caller).
pub fn make_flow_sample(a: &ActionChunk, rng: &mut ChaCha8Rng, s: f64) -> Result<FlowSample> {
    let mut omega = Mat::zeros(a.horizon, a.dim);
    for v in omega.data.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    let tau = sample_tau(rng, s, TAU_BETA_ALPHA, TAU_BETA_BETA);
    make_flow_sample_at(a, omega, tau)
}
