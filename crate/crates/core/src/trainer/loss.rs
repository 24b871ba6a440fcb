//! The combined training objective: next-token cross entropy over all
//! supervised text/discrete positions plus α times the flow-matching
//! squared error.
//!
//! CE is averaged over the total number of supervised tokens in the batch;
//! the flow term is averaged over chunk elements (horizon × width) per flow
//! example and then over flow examples. Per-example gradients are obtained
//! by seeding each loss node with its closed-form batch coefficient, so one
//! backward pass per example accumulates exactly the gradient of the
//! combined batch loss.

use crate::mat::Mat;
use crate::model::forward::TwoExpertModel;
use crate::model::sequence::MixedSequence;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchMetrics {
    /// Mean next-token negative log-likelihood per supervised token.
    pub ce_loss: f64,
    /// Mean squared velocity error per chunk element per flow example.
    pub flow_loss: f64,
    /// ce_loss + α·flow_loss.
    pub combined: f64,
    pub ce_tokens: usize,
    pub n_flow: usize,
}

fn batch_shape(batch: &[MixedSequence], alpha: f64) -> Result<(usize, usize)> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("batch"));
    }
    let ce_tokens: usize = batch.iter().map(|s| s.target_tokens.len()).sum();
    let n_flow = batch.iter().filter(|s| s.flow.is_some()).count();
    if alpha > 0.0 && n_flow == 0 {
        return Err(Error::NoFlowSample(alpha));
    }
    if ce_tokens == 0 && n_flow == 0 {
        return Err(Error::EmptyInput("batch supervises nothing"));
    }
    Ok((ce_tokens, n_flow))
}

/// Forward-only batch loss (evaluation and invariance tests).
pub fn combined_loss(model: &TwoExpertModel, batch: &[MixedSequence], alpha: f64) -> Result<BatchMetrics> {
    let (ce_tokens, n_flow) = batch_shape(batch, alpha)?;
    let mut ce_sum = 0.0;
    let mut flow_sq = 0.0;
    for seq in batch {
        let pass = model.forward(seq)?;
        if let Some(ce) = pass.ce_sum {
            ce_sum += pass.tape.scalar(ce);
        }
        if let Some(fs) = pass.flow_sq {
            flow_sq += pass.tape.scalar(fs);
        }
    }
    Ok(metrics_from(model, ce_sum, flow_sq, ce_tokens, n_flow, alpha))
}

fn metrics_from(
    model: &TwoExpertModel,
    ce_sum: f64,
    flow_sq: f64,
    ce_tokens: usize,
    n_flow: usize,
    alpha: f64,
) -> BatchMetrics {
    let chunk_elems = (model.config.horizon * model.config.d_max) as f64;
    let ce_loss = if ce_tokens > 0 { ce_sum / ce_tokens as f64 } else { 0.0 };
    let flow_loss = if n_flow > 0 {
        flow_sq / chunk_elems / n_flow as f64
    } else {
        0.0
    };
    BatchMetrics {
        ce_loss,
        flow_loss,
        combined: ce_loss + alpha * flow_loss,
        ce_tokens,
        n_flow,
    }
}

/// Batch loss with gradients accumulated per parameter (same order as the
/// model's parameter set).
pub fn combined_loss_and_grads(
    model: &TwoExpertModel,
    batch: &[MixedSequence],
    alpha: f64,
) -> Result<(BatchMetrics, Vec<Mat>)> {
    let (ce_tokens, n_flow) = batch_shape(batch, alpha)?;
    let chunk_elems = (model.config.horizon * model.config.d_max) as f64;
    let ce_w = if ce_tokens > 0 { 1.0 / ce_tokens as f64 } else { 0.0 };
    let flow_w = if n_flow > 0 {
        alpha / (chunk_elems * n_flow as f64)
    } else {
        0.0
    };

    let mut grads = model.params.zeros_like();
    let mut ce_sum = 0.0;
    let mut flow_sq = 0.0;
    for seq in batch {
        let mut pass = model.forward(seq)?;
        let mut roots: Vec<(crate::model::tape::NodeId, f64)> = Vec::with_capacity(2);
        if let Some(ce) = pass.ce_sum {
            ce_sum += pass.tape.scalar(ce);
            roots.push((ce, ce_w));
        }
        if let Some(fs) = pass.flow_sq {
            flow_sq += pass.tape.scalar(fs);
            if flow_w > 0.0 {
                roots.push((fs, flow_w));
            }
        }
        if roots.is_empty() {
            continue;
        }
        pass.tape.backward_weighted(&roots);
        for &(pidx, leaf) in pass.tape.param_leaves() {
            if let Some(g) = pass.tape.grad(leaf) {
                let acc = &mut grads[pidx];
                for (a, b) in acc.data.iter_mut().zip(&g.data) {
                    *a += b;
                }
            }
        }
    }
    Ok((
        metrics_from(model, ce_sum, flow_sq, ce_tokens, n_flow, alpha),
        grads,
    ))
}
