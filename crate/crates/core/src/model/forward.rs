//! Two-expert transformer.
//!
//! One backbone tower processes image patches and text/discrete tokens; a
//! narrower action-expert tower processes continuous noisy action rows. The
//! towers share nothing except the softmax attention itself: each projects
//! into a common `heads*head_dim` attention space with its own Q/K/V/O maps,
//! the joint attention runs under the role mask, and the outputs route back
//! to their own residual streams. Action-expert normalization sites are
//! adaptive: gain and shift are modulated by a learned function of the
//! denoising time.
//!
//! Initialization makes the model exactly uniform at step zero: the text
//! head and the action output map start at zero (so CE starts at ln V and
//! the predicted velocity at 0), and the adaptive-norm modulators start at
//! zero (so every adaptive norm begins as a plain gained RMS norm).

use rand_chacha::ChaCha8Rng;

use crate::mat::Mat;
use crate::model::config::ModelConfig;
use crate::model::mask::build_attention_mask;
use crate::model::params::{init_embedding, init_linear, ones, ParamSet};
use crate::model::sequence::MixedSequence;
use crate::model::tape::{NodeId, Tape};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct TwoExpertModel {
    pub config: ModelConfig,
    pub vocab_size: usize,
    pub params: ParamSet,
    pub has_action_expert: bool,
}

/// Sinusoidal features of the denoising time: a geometric frequency ladder
/// of sin/cos pairs, constant (not learned).
pub fn timestep_features(tau: f64, width: usize) -> Vec<f64> {
    assert!(width % 2 == 0);
    let half = width / 2;
    let mut out = Vec::with_capacity(width);
    for i in 0..half {
        let exponent = if half > 1 { i as f64 / (half - 1) as f64 } else { 0.0 };
        let omega = 1000f64.powf(exponent);
        out.push((omega * tau).sin());
        out.push((omega * tau).cos());
    }
    out
}

impl TwoExpertModel {
    /// Backbone only (pre-training shape): no action expert exists yet.
    pub fn new_backbone(config: ModelConfig, vocab_size: usize) -> Result<Self> {
        config.validate()?;
        if vocab_size == 0 {
            return Err(Error::InvalidConfig("empty vocabulary".into()));
        }
        let mut rng = crate::seeding::rng(config.init_seed, &[0xb0de1]);
        let mut p = ParamSet::new();
        let w = config.width;
        let a = config.attn_dim();
        let pd = config.patch * config.patch * 3;
        p.insert("embed.table", init_embedding(&mut rng, vocab_size, w));
        p.insert("patch.w", init_linear(&mut rng, pd, w));
        p.insert("patch.b", Mat::zeros(1, w));
        for l in 0..config.depth {
            p.insert(&format!("vlm.l{l}.norm1.g"), ones(1, w));
            p.insert(&format!("vlm.l{l}.wq"), init_linear(&mut rng, w, a));
            p.insert(&format!("vlm.l{l}.wk"), init_linear(&mut rng, w, a));
            p.insert(&format!("vlm.l{l}.wv"), init_linear(&mut rng, w, a));
            p.insert(&format!("vlm.l{l}.wo"), init_linear(&mut rng, a, w));
            p.insert(&format!("vlm.l{l}.norm2.g"), ones(1, w));
            p.insert(&format!("vlm.l{l}.mlp.w1"), init_linear(&mut rng, w, config.mlp_dim));
            p.insert(&format!("vlm.l{l}.mlp.w2"), init_linear(&mut rng, config.mlp_dim, w));
        }
        p.insert("vlm.final_norm.g", ones(1, w));
        p.insert("head.text", Mat::zeros(w, vocab_size));
        Ok(TwoExpertModel {
            config,
            vocab_size,
            params: p,
            has_action_expert: false,
        })
    }

    /// Attach a freshly initialized action expert (post-training shape).
    pub fn add_action_expert(&mut self, seed: u64) {
        assert!(!self.has_action_expert, "action expert already attached");
        let mut rng: ChaCha8Rng = crate::seeding::rng(seed, &[0xac7e]);
        let c = &self.config;
        let e = c.expert_width;
        let a = c.attn_dim();
        let t = c.timestep_width;
        let p = &mut self.params;
        p.insert("act.in.w", init_linear(&mut rng, c.d_max, e));
        p.insert("act.in.b", Mat::zeros(1, e));
        p.insert("time.w1", init_linear(&mut rng, t, t));
        p.insert("time.w2", init_linear(&mut rng, t, t));
        for l in 0..c.depth {
            for site in ["norm1", "norm2"] {
                p.insert(&format!("act.l{l}.{site}.g"), ones(1, e));
                p.insert(&format!("act.l{l}.{site}.s"), Mat::zeros(t, e));
                p.insert(&format!("act.l{l}.{site}.b"), Mat::zeros(t, e));
            }
            p.insert(&format!("act.l{l}.wq"), init_linear(&mut rng, e, a));
            p.insert(&format!("act.l{l}.wk"), init_linear(&mut rng, e, a));
            p.insert(&format!("act.l{l}.wv"), init_linear(&mut rng, e, a));
            p.insert(&format!("act.l{l}.wo"), init_linear(&mut rng, a, e));
            p.insert(&format!("act.l{l}.mlp.w1"), init_linear(&mut rng, e, c.expert_mlp_dim));
            p.insert(&format!("act.l{l}.mlp.w2"), init_linear(&mut rng, c.expert_mlp_dim, e));
        }
        p.insert("act.final_norm.g", ones(1, e));
        p.insert("act.final_norm.s", Mat::zeros(t, e));
        p.insert("act.final_norm.b", Mat::zeros(t, e));
        p.insert("act.out.w", Mat::zeros(e, c.d_max));
        p.insert("act.out.b", Mat::zeros(1, c.d_max));
        self.has_action_expert = true;
    }

    /// Parameter-name prefixes belonging to the action expert.
    pub fn is_expert_param(name: &str) -> bool {
        name.starts_with("act.") || name.starts_with("time.")
    }

    pub fn config_hash(&self) -> String {
        self.config.hash()
    }
}

/// One forward construction over a tape, with handles to everything callers
/// need: loss nodes for training, logits for decoding, velocity for flow
/// integration, and the backbone's final hidden rows for isolation tests.
pub struct ForwardPass {
    pub tape: Tape,
    /// Summed token NLL and the number of supervised tokens.
    pub ce_sum: Option<NodeId>,
    pub ce_count: usize,
    /// Summed squared velocity error over horizon x d_max.
    pub flow_sq: Option<NodeId>,
    /// 1 x vocab logits predicting the token after the last text position.
    pub logits_next: NodeId,
    /// horizon x d_max predicted velocity.
    pub velocity: Option<NodeId>,
    /// Final backbone hidden states (prefix + target rows).
    pub vlm_final: NodeId,
}

struct LeafCache {
    ids: Vec<Option<NodeId>>,
}

impl LeafCache {
    fn new(n: usize) -> Self {
        LeafCache {
            ids: vec![None; n],
        }
    }

    fn get(&mut self, tape: &mut Tape, params: &ParamSet, idx: usize) -> NodeId {
        if let Some(id) = self.ids[idx] {
            return id;
        }
        let id = tape.leaf(params.mats[idx].clone(), Some(idx));
        self.ids[idx] = Some(id);
        id
    }
}

impl TwoExpertModel {
    pub fn forward(&self, seq: &MixedSequence) -> Result<ForwardPass> {
        let c = &self.config;
        if seq.patches.len() != c.n_patches() {
            return Err(Error::DimMismatch {
                context: "patch count",
                expected: c.n_patches(),
                got: seq.patches.len(),
            });
        }
        let has_flow = seq.flow.is_some();
        if has_flow && !self.has_action_expert {
            return Err(Error::InvalidConfig(
                "sequence has a continuous action suffix but the model has no action expert".into(),
            ));
        }
        for &t in seq.prefix_tokens.iter().chain(&seq.target_tokens) {
            if t as usize >= self.vocab_size {
                return Err(Error::TokenOutOfRange(t, self.vocab_size));
            }
        }

        let mut tape = Tape::new();
        let mut cache = LeafCache::new(self.params.len());
        let p = &self.params;
        macro_rules! lf {
            ($name:expr) => {
                cache.get(&mut tape, p, p.idx(&$name))
            };
        }

        let roles = seq.roles();
        let mask = build_attention_mask(&roles);
        let n_text = seq.prefix_len() + seq.target_tokens.len();

        // Backbone inputs: projected patches, then embedded tokens.
        let patch_dim = c.patch * c.patch * 3;
        let mut pm = Mat::zeros(seq.patches.len(), patch_dim);
        for (r, v) in seq.patches.iter().enumerate() {
            if v.len() != patch_dim {
                return Err(Error::DimMismatch {
                    context: "patch vector",
                    expected: patch_dim,
                    got: v.len(),
                });
            }
            pm.data[r * patch_dim..(r + 1) * patch_dim].copy_from_slice(v);
        }
        let patches = tape.constant(pm);
        let pw = lf!("patch.w");
        let pb = lf!("patch.b");
        let x_img = tape.matmul(patches, pw);
        let x_img = tape.row_add(x_img, pb);
        let ids: Vec<u32> = seq
            .prefix_tokens
            .iter()
            .chain(&seq.target_tokens)
            .copied()
            .collect();
        let table = lf!("embed.table");
        let mut x_v = if ids.is_empty() {
            x_img
        } else {
            let x_tok = tape.embed(table, &ids);
            tape.concat_rows(x_img, x_tok)
        };

        // Action-expert inputs: projected noisy rows plus time conditioning.
        let mut x_a = None;
        let mut cond = None;
        if let Some(flow) = &seq.flow {
            let noisy = tape.constant(flow.noisy.clone());
            let inw = lf!("act.in.w");
            let inb = lf!("act.in.b");
            let xa = tape.matmul(noisy, inw);
            x_a = Some(tape.row_add(xa, inb));
            let phi = tape.constant(Mat::from_vec(
                1,
                c.timestep_width,
                timestep_features(flow.tau, c.timestep_width),
            ));
            let t1 = lf!("time.w1");
            let t2 = lf!("time.w2");
            let h = tape.matmul(phi, t1);
            let h = tape.swish(h);
            let h = tape.matmul(h, t2);
            cond = Some(tape.swish(h));
        }

        // Adaptive RMS norm for the expert tower.
        let ada = |tape: &mut Tape,
                   cache: &mut LeafCache,
                   x: NodeId,
                   cond: NodeId,
                   site: &str|
         -> NodeId {
            let g = cache.get(tape, p, p.idx(&format!("{site}.g")));
            let s = cache.get(tape, p, p.idx(&format!("{site}.s")));
            let b = cache.get(tape, p, p.idx(&format!("{site}.b")));
            let n = tape.rms_norm(x);
            let n = tape.row_mul(n, g);
            let s_vec = tape.matmul(cond, s);
            let s_vec = tape.add_const(s_vec, 1.0);
            let b_vec = tape.matmul(cond, b);
            let m = tape.row_mul(n, s_vec);
            tape.row_add(m, b_vec)
        };

        for l in 0..c.depth {
            // Joint attention.
            let g1 = lf!(format!("vlm.l{l}.norm1.g"));
            let h_v = tape.rms_norm(x_v);
            let h_v = tape.row_mul(h_v, g1);
            let wq = lf!(format!("vlm.l{l}.wq"));
            let wk = lf!(format!("vlm.l{l}.wk"));
            let wv = lf!(format!("vlm.l{l}.wv"));
            let wo = lf!(format!("vlm.l{l}.wo"));
            let qv = tape.matmul(h_v, wq);
            let kv = tape.matmul(h_v, wk);
            let vv = tape.matmul(h_v, wv);
            if let (Some(xa), Some(cd)) = (x_a, cond) {
                let h_a = ada(&mut tape, &mut cache, xa, cd, &format!("act.l{l}.norm1"));
                let awq = lf!(format!("act.l{l}.wq"));
                let awk = lf!(format!("act.l{l}.wk"));
                let awv = lf!(format!("act.l{l}.wv"));
                let awo = lf!(format!("act.l{l}.wo"));
                let qa = tape.matmul(h_a, awq);
                let ka = tape.matmul(h_a, awk);
                let va = tape.matmul(h_a, awv);
                let q = tape.concat_rows(qv, qa);
                let k = tape.concat_rows(kv, ka);
                let v = tape.concat_rows(vv, va);
                let att = tape.mha(q, k, v, c.heads, &mask);
                let rows_v: Vec<usize> = (0..n_text).collect();
                let rows_a: Vec<usize> = (n_text..roles.len()).collect();
                let att_v = tape.gather(att, &rows_v);
                let att_a = tape.gather(att, &rows_a);
                let ov = tape.matmul(att_v, wo);
                x_v = tape.add(x_v, ov);
                let oa = tape.matmul(att_a, awo);
                x_a = Some(tape.add(xa, oa));
            } else {
                let att = tape.mha(qv, kv, vv, c.heads, &mask);
                let ov = tape.matmul(att, wo);
                x_v = tape.add(x_v, ov);
            }

            // Backbone MLP.
            let g2 = lf!(format!("vlm.l{l}.norm2.g"));
            let m = tape.rms_norm(x_v);
            let m = tape.row_mul(m, g2);
            let w1 = lf!(format!("vlm.l{l}.mlp.w1"));
            let w2 = lf!(format!("vlm.l{l}.mlp.w2"));
            let m = tape.matmul(m, w1);
            let m = tape.swish(m);
            let m = tape.matmul(m, w2);
            x_v = tape.add(x_v, m);

            // Expert MLP.
            if let (Some(xa), Some(cd)) = (x_a, cond) {
                let m = ada(&mut tape, &mut cache, xa, cd, &format!("act.l{l}.norm2"));
                let w1 = lf!(format!("act.l{l}.mlp.w1"));
                let w2 = lf!(format!("act.l{l}.mlp.w2"));
                let m = tape.matmul(m, w1);
                let m = tape.swish(m);
                let m = tape.matmul(m, w2);
                x_a = Some(tape.add(xa, m));
            }
        }

        // Backbone head.
        let fg = lf!("vlm.final_norm.g");
        let f_v = tape.rms_norm(x_v);
        let f_v = tape.row_mul(f_v, fg);
        let head = lf!("head.text");
        let t_len = seq.target_tokens.len();
        let prefix_len = seq.prefix_len();
        let (ce_sum, ce_count) = if t_len > 0 {
            // Each target token is predicted from its predecessor's hidden.
            let pred_rows: Vec<usize> = (prefix_len - 1..prefix_len - 1 + t_len).collect();
            let h = tape.gather(f_v, &pred_rows);
            let logits = tape.matmul(h, head);
            let ce = tape.cross_entropy(logits, &seq.target_tokens);
            (Some(ce), t_len)
        } else {
            (None, 0)
        };
        let last = tape.gather(f_v, &[n_text - 1]);
        let logits_next = tape.matmul(last, head);

        // Expert head.
        let (velocity, flow_sq) = if let (Some(xa), Some(cd)) = (x_a, cond) {
            let f_a = ada(&mut tape, &mut cache, xa, cd, "act.final_norm");
            let ow = lf!("act.out.w");
            let ob = lf!("act.out.b");
            let v = tape.matmul(f_a, ow);
            let v = tape.row_add(v, ob);
            let sq = tape.sum_sq(v, seq.flow.as_ref().unwrap().target_u.clone());
            (Some(v), Some(sq))
        } else {
            (None, None)
        };

        Ok(ForwardPass {
            tape,
            ce_sum,
            ce_count,
            flow_sq,
            logits_next,
            velocity,
            vlm_final: f_v,
        })
    }

    /// Greedy next-token logits (inference view).
    pub fn next_token_logits(&self, seq: &MixedSequence) -> Result<Vec<f64>> {
        let pass = self.forward(seq)?;
        Ok(pass.tape.value(pass.logits_next).data.clone())
    }

    /// Predicted velocity field for a flow sequence (inference view).
    pub fn predict_velocity(&self, seq: &MixedSequence) -> Result<Mat> {
        let pass = self.forward(seq)?;
        let v = pass
            .velocity
            .ok_or_else(|| Error::InvalidConfig("sequence has no action suffix".into()))?;
        Ok(pass.tape.value(v).clone())
    }
}
