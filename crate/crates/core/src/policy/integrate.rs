//! Euler integration of the learned velocity field from noise to an action
//! chunk.
//!
//! The training interpolant is a^τ = τ·a + (1−τ)·ω with regression target
//! u = ω − a, so da^τ/dτ = a − ω = −u. Starting from x = ω at τ = 0 and
//! stepping τ by δ therefore updates x ← x − δ·v̂; after 1/δ steps x sits at
//! τ = 1, the clean-action end of the path. The step must satisfy
//! δ > 1 − s (the τ-sampler's support ceiling) so every evaluation point
//! lies inside the trained range.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::mat::Mat;
use crate::model::forward::TwoExpertModel;
use crate::model::sequence::{build_sequence, FlowSuffix, SeqTarget};
use crate::text::TextVocab;
use crate::trainer::flow::TAU_S;
use crate::world::render::Image;
use crate::{Error, Result};

/// Uniform step size for `steps` integration steps, validated against the
/// τ-sampler support.
pub fn delta_for(steps: usize) -> Result<f64> {
    if steps == 0 {
        return Err(Error::InvalidConfig("integration needs at least 1 step".into()));
    }
    let delta = 1.0 / steps as f64;
    if delta <= 1.0 - TAU_S {
        return Err(Error::InvalidConfig(format!(
            "step {delta} must exceed the untrained tail {}",
            1.0 - TAU_S
        )));
    }
    Ok(delta)
}

/// Draw the integration start point ω ~ N(0, I).
pub fn sample_omega(horizon: usize, dim: usize, rng: &mut ChaCha8Rng) -> Mat {
    let mut m = Mat::zeros(horizon, dim);
    for v in m.data.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
    m
}

/// Drive `x ← x − δ·v̂` from `omega` with `v̂ = field(x, τ_k, k)` at
/// τ_k = k·δ. Generic over the field so oracle fields can exercise the
/// integrator in isolation.
pub fn integrate_field(
    omega: &Mat,
    steps: usize,
    mut field: impl FnMut(&Mat, f64, usize) -> Result<Mat>,
) -> Result<Mat> {
    let delta = delta_for(steps)?;
    let mut x = omega.clone();
    for k in 0..steps {
        let tau = k as f64 * delta;
        let v = field(&x, tau, k)?;
        if v.rows != x.rows || v.cols != x.cols {
            return Err(Error::DimMismatch {
                context: "velocity shape",
                expected: x.rows * x.cols,
                got: v.rows * v.cols,
            });
        }
        for (xi, vi) in x.data.iter_mut().zip(&v.data) {
            *xi -= delta * vi;
        }
        if !x.data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteFlowStep(k));
        }
    }
    Ok(x)
}

/// Produce one normalized action chunk (horizon × d_max) from the model,
/// conditioning only on the supplied subtask text — never on the overall
/// task prompt, which by the policy factorization the low level must not
/// see.
#[allow(clippy::too_many_arguments)]
pub fn integrate_flow(
    model: &TwoExpertModel,
    vocab: &TextVocab,
    images: &[Image],
    subtask: &str,
    control_mode: &str,
    proprio: &[f64],
    steps: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Mat> {
    let c = &model.config;
    let base = build_sequence(
        c,
        vocab,
        images,
        subtask,
        control_mode,
        proprio,
        SeqTarget::None,
        None,
    )?;
    let omega = sample_omega(c.horizon, c.d_max, rng);
    integrate_field(&omega, steps, |x, tau, _| {
        let mut seq = base.clone();
        seq.flow = Some(FlowSuffix {
            noisy: x.clone(),
            target_u: Mat::zeros(c.horizon, c.d_max),
            tau,
        });
        model.predict_velocity(&seq)
    })
}
