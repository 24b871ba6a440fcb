//! Reverse-mode autodiff over a closed op set.
//!
//! A `Tape` is built fresh for every example: leaves are pushed for the
//! parameters (and constants) the graph touches, ops compute eagerly on
//! push, and `backward_weighted` accumulates gradients for any weighted sum
//! of scalar roots. Leaves remember their parameter index so a trainer can
//! scatter tape gradients back into its parameter-aligned accumulators.
//!
//! The op set is exactly what the two-expert model needs: dense matmul,
//! residual add, row-broadcast scale/shift (adaptive norms), swish, RMS
//! normalization, fused masked multi-head attention, embedding gather, row
//! gather/concat (expert routing), fused softmax cross-entropy, and summed
//! squared error.

use crate::mat::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub usize);

enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Scale(NodeId, f64),
    AddConst(NodeId),
    /// Elementwise multiply of every row of `a` by the single row `v`.
    RowMul(NodeId, NodeId),
    /// Add the single row `v` to every row of `a`.
    RowAdd(NodeId, NodeId),
    Swish(NodeId),
    /// Per-row x / sqrt(mean(x^2) + eps), without gain.
    RmsNorm(NodeId),
    Mha {
        q: NodeId,
        k: NodeId,
        v: NodeId,
        heads: usize,
        /// Cached per-head attention probabilities (forward byproduct).
        /// Masked-out entries are exactly zero, so backward needs no mask.
        probs: Vec<Mat>,
    },
    Embed {
        table: NodeId,
        ids: Vec<u32>,
    },
    Gather {
        a: NodeId,
        rows: Vec<usize>,
    },
    Concat(NodeId, NodeId),
    CrossEntropy {
        logits: NodeId,
        targets: Vec<u32>,
        softmax: Mat,
    },
    SumSq {
        a: NodeId,
        target: Mat,
    },
}

struct Node {
    value: Mat,
    op: Op,
}

pub const RMS_EPS: f64 = 1e-6;
const MASKED_SCORE: f64 = -1e30;

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Mat>>,
    leaves: Vec<(usize, NodeId)>,
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            grads: Vec::new(),
            leaves: Vec::new(),
        }
    }

    fn push(&mut self, value: Mat, op: Op) -> NodeId {
        debug_assert!(value.is_finite(), "non-finite node value");
        self.nodes.push(Node { value, op });
        self.grads.push(None);
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Mat {
        &self.nodes[id.0].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        debug_assert_eq!(self.value(id).data.len(), 1);
        self.value(id).data[0]
    }

    pub fn grad(&self, id: NodeId) -> Option<&Mat> {
        self.grads[id.0].as_ref()
    }

    /// Leaves that carry a parameter index, for gradient scatter.
    pub fn param_leaves(&self) -> &[(usize, NodeId)] {
        &self.leaves
    }

    pub fn leaf(&mut self, value: Mat, param: Option<usize>) -> NodeId {
        let id = self.push(value, Op::Leaf);
        if let Some(p) = param {
            self.leaves.push((p, id));
        }
        id
    }

    pub fn constant(&mut self, value: Mat) -> NodeId {
        self.leaf(value, None)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = crate::mat::matmul_nn(self.value(a), self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!((va.rows, va.cols), (vb.rows, vb.cols), "add shape");
        let mut v = va.clone();
        v.add_in_place(vb);
        self.push(v, Op::Add(a, b))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let mut v = self.value(a).clone();
        v.scale_in_place(c);
        self.push(v, Op::Scale(a, c))
    }

    pub fn add_const(&mut self, a: NodeId, c: f64) -> NodeId {
        let mut v = self.value(a).clone();
        for x in v.data.iter_mut() {
            *x += c;
        }
        self.push(v, Op::AddConst(a))
    }

    pub fn row_mul(&mut self, a: NodeId, v: NodeId) -> NodeId {
        let (ma, mv) = (self.value(a), self.value(v));
        assert_eq!(mv.rows, 1, "row_mul broadcast row");
        assert_eq!(ma.cols, mv.cols, "row_mul cols");
        let mut out = ma.clone();
        for r in 0..out.rows {
            for c in 0..out.cols {
                out.data[r * out.cols + c] *= mv.data[c];
            }
        }
        self.push(out, Op::RowMul(a, v))
    }

    pub fn row_add(&mut self, a: NodeId, v: NodeId) -> NodeId {
        let (ma, mv) = (self.value(a), self.value(v));
        assert_eq!(mv.rows, 1, "row_add broadcast row");
        assert_eq!(ma.cols, mv.cols, "row_add cols");
        let mut out = ma.clone();
        for r in 0..out.rows {
            for c in 0..out.cols {
                out.data[r * out.cols + c] += mv.data[c];
            }
        }
        self.push(out, Op::RowAdd(a, v))
    }

    pub fn swish(&mut self, a: NodeId) -> NodeId {
        let mut v = self.value(a).clone();
        for x in v.data.iter_mut() {
            *x *= sigmoid(*x);
        }
        self.push(v, Op::Swish(a))
    }

    pub fn rms_norm(&mut self, a: NodeId) -> NodeId {
        let ma = self.value(a);
        let mut out = ma.clone();
        for r in 0..out.rows {
            let row = &ma.data[r * ma.cols..(r + 1) * ma.cols];
            let ms = row.iter().map(|x| x * x).sum::<f64>() / ma.cols as f64;
            let inv = 1.0 / (ms + RMS_EPS).sqrt();
            for c in 0..ma.cols {
                out.data[r * ma.cols + c] = row[c] * inv;
            }
        }
        self.push(out, Op::RmsNorm(a))
    }

    /// Fused masked multi-head attention over already-projected Q, K, V
    /// (each N x heads*head_dim). `mask[q*n + k]` says whether query row q
    /// may attend to key row k. Fully masked rows produce zero output.
    pub fn mha(&mut self, q: NodeId, k: NodeId, v: NodeId, heads: usize, mask: &[bool]) -> NodeId {
        let (mq, mk, mv) = (self.value(q), self.value(k), self.value(v));
        let n = mq.rows;
        assert_eq!(mk.rows, n);
        assert_eq!(mv.rows, n);
        assert_eq!(mq.cols, mk.cols);
        assert_eq!(mq.cols, mv.cols);
        assert_eq!(mask.len(), n * n, "mask size");
        assert_eq!(mq.cols % heads, 0);
        let hd = mq.cols / heads;
        let scale = 1.0 / (hd as f64).sqrt();
        let mut out = Mat::zeros(n, mq.cols);
        let mut probs = Vec::with_capacity(heads);
        for h in 0..heads {
            let off = h * hd;
            let mut p = Mat::zeros(n, n);
            for qi in 0..n {
                // Scores for this query row.
                let qrow = &mq.data[qi * mq.cols + off..qi * mq.cols + off + hd];
                let mut mx = f64::NEG_INFINITY;
                let mut scores = vec![MASKED_SCORE; n];
                for ki in 0..n {
                    if mask[qi * n + ki] {
                        let krow = &mk.data[ki * mk.cols + off..ki * mk.cols + off + hd];
                        let s: f64 = qrow.iter().zip(krow).map(|(a, b)| a * b).sum::<f64>() * scale;
                        scores[ki] = s;
                        if s > mx {
                            mx = s;
                        }
                    }
                }
                if mx == f64::NEG_INFINITY {
                    continue; // fully masked row: zero attention
                }
                let mut z = 0.0;
                for ki in 0..n {
                    if scores[ki] != MASKED_SCORE {
                        let e = (scores[ki] - mx).exp();
                        p.data[qi * n + ki] = e;
                        z += e;
                    }
                }
                for ki in 0..n {
                    p.data[qi * n + ki] /= z;
                }
                // Output row = probs . V_h
                for ki in 0..n {
                    let w = p.data[qi * n + ki];
                    if w != 0.0 {
                        let vrow = &mv.data[ki * mv.cols + off..ki * mv.cols + off + hd];
                        for c in 0..hd {
                            out.data[qi * mq.cols + off + c] += w * vrow[c];
                        }
                    }
                }
            }
            probs.push(p);
        }
        self.push(
            out,
            Op::Mha {
                q,
                k,
                v,
                heads,
                probs,
            },
        )
    }

    pub fn embed(&mut self, table: NodeId, ids: &[u32]) -> NodeId {
        let t = self.value(table);
        let mut out = Mat::zeros(ids.len(), t.cols);
        for (r, &id) in ids.iter().enumerate() {
            let id = id as usize;
            assert!(id < t.rows, "token id {id} out of embedding range {}", t.rows);
            out.data[r * t.cols..(r + 1) * t.cols]
                .copy_from_slice(&t.data[id * t.cols..(id + 1) * t.cols]);
        }
        self.push(
            out,
            Op::Embed {
                table,
                ids: ids.to_vec(),
            },
        )
    }

    pub fn gather(&mut self, a: NodeId, rows: &[usize]) -> NodeId {
        let ma = self.value(a);
        let mut out = Mat::zeros(rows.len(), ma.cols);
        for (r, &src) in rows.iter().enumerate() {
            assert!(src < ma.rows, "gather row {src} out of {}", ma.rows);
            out.data[r * ma.cols..(r + 1) * ma.cols]
                .copy_from_slice(&ma.data[src * ma.cols..(src + 1) * ma.cols]);
        }
        self.push(
            out,
            Op::Gather {
                a,
                rows: rows.to_vec(),
            },
        )
    }

    pub fn concat_rows(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (ma, mb) = (self.value(a), self.value(b));
        assert_eq!(ma.cols, mb.cols, "concat cols");
        let mut out = Mat::zeros(ma.rows + mb.rows, ma.cols);
        out.data[..ma.data.len()].copy_from_slice(&ma.data);
        out.data[ma.data.len()..].copy_from_slice(&mb.data);
        self.push(out, Op::Concat(a, b))
    }

    /// Summed negative log-likelihood over all rows (one target per row).
    /// Returns a 1x1 node; divide by the batch token count via the backward
    /// seed weight.
    pub fn cross_entropy(&mut self, logits: NodeId, targets: &[u32]) -> NodeId {
        let ml = self.value(logits);
        assert_eq!(ml.rows, targets.len(), "one target per logit row");
        let mut softmax = Mat::zeros(ml.rows, ml.cols);
        let mut loss = 0.0;
        for r in 0..ml.rows {
            let row = &ml.data[r * ml.cols..(r + 1) * ml.cols];
            let t = targets[r] as usize;
            assert!(t < ml.cols, "target {t} out of vocab {}", ml.cols);
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for &x in row {
                z += (x - mx).exp();
            }
            let lse = mx + z.ln();
            loss += lse - row[t];
            for c in 0..ml.cols {
                softmax.data[r * ml.cols + c] = (row[c] - mx).exp() / z;
            }
        }
        self.push(
            Mat::from_vec(1, 1, vec![loss]),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                softmax,
            },
        )
    }

    /// Sum of squared differences against a fixed target, as a 1x1 node.
    pub fn sum_sq(&mut self, a: NodeId, target: Mat) -> NodeId {
        let ma = self.value(a);
        assert_eq!((ma.rows, ma.cols), (target.rows, target.cols), "sum_sq shape");
        let s: f64 = ma
            .data
            .iter()
            .zip(&target.data)
            .map(|(x, t)| (x - t) * (x - t))
            .sum();
        self.push(Mat::from_vec(1, 1, vec![s]), Op::SumSq { a, target })
    }

    fn grad_mut(&mut self, id: NodeId) -> &mut Mat {
        let (rows, cols) = {
            let v = &self.nodes[id.0].value;
            (v.rows, v.cols)
        };
        self.grads[id.0].get_or_insert_with(|| Mat::zeros(rows, cols))
    }

    pub fn backward(&mut self, root: NodeId) {
        self.backward_weighted(&[(root, 1.0)]);
    }

    /// Backpropagate a weighted sum of scalar roots.
    pub fn backward_weighted(&mut self, roots: &[(NodeId, f64)]) {
        for g in self.grads.iter_mut() {
            *g = None;
        }
        for &(root, w) in roots {
            assert_eq!(self.nodes[root.0].value.data.len(), 1, "root must be scalar");
            self.grad_mut(root).data[0] += w;
        }
        for i in (0..self.nodes.len()).rev() {
            if self.grads[i].is_none() {
                continue;
            }
            let gout = self.grads[i].take().unwrap();
            self.propagate(i, &gout);
            self.grads[i] = Some(gout);
        }
    }

    fn propagate(&mut self, i: usize, gout: &Mat) {
        // Split borrows: read values immutably via raw copies where needed.
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (a, b) = (*a, *b);
                let ga = crate::mat::matmul_nt(gout, self.value(b));
                let gb = crate::mat::matmul_tn(self.value(a), gout);
                self.grad_mut(a).add_in_place(&ga);
                self.grad_mut(b).add_in_place(&gb);
            }
            Op::Add(a, b) => {
                let (a, b) = (*a, *b);
                self.grad_mut(a).add_in_place(gout);
                self.grad_mut(b).add_in_place(gout);
            }
            Op::Scale(a, c) => {
                let (a, c) = (*a, *c);
                let mut g = gout.clone();
                g.scale_in_place(c);
                self.grad_mut(a).add_in_place(&g);
            }
            Op::AddConst(a) => {
                let a = *a;
                self.grad_mut(a).add_in_place(gout);
            }
            Op::RowMul(a, v) => {
                let (a, v) = (*a, *v);
                let va = self.value(a).clone();
                let vv = self.value(v).clone();
                {
                    let ga = self.grad_mut(a);
                    for r in 0..gout.rows {
                        for c in 0..gout.cols {
                            ga.data[r * gout.cols + c] += gout.data[r * gout.cols + c] * vv.data[c];
                        }
                    }
                }
                {
                    let gv = self.grad_mut(v);
                    for r in 0..gout.rows {
                        for c in 0..gout.cols {
                            gv.data[c] += gout.data[r * gout.cols + c] * va.data[r * gout.cols + c];
                        }
                    }
                }
            }
            Op::RowAdd(a, v) => {
                let (a, v) = (*a, *v);
                self.grad_mut(a).add_in_place(gout);
                let gv = self.grad_mut(v);
                for r in 0..gout.rows {
                    for c in 0..gout.cols {
                        gv.data[c] += gout.data[r * gout.cols + c];
                    }
                }
            }
            Op::Swish(a) => {
                let a = *a;
                let va = self.value(a).clone();
                let ga = self.grad_mut(a);
                for (idx, &x) in va.data.iter().enumerate() {
                    let s = sigmoid(x);
                    let d = s * (1.0 + x * (1.0 - s));
                    ga.data[idx] += gout.data[idx] * d;
                }
            }
            Op::RmsNorm(a) => {
                let a = *a;
                let va = self.value(a).clone();
                let vy = self.nodes[i].value.clone();
                let ga = self.grad_mut(a);
                let cols = va.cols;
                for r in 0..va.rows {
                    let xrow = &va.data[r * cols..(r + 1) * cols];
                    let yrow = &vy.data[r * cols..(r + 1) * cols];
                    let grow = &gout.data[r * cols..(r + 1) * cols];
                    let ms = xrow.iter().map(|x| x * x).sum::<f64>() / cols as f64;
                    let inv = 1.0 / (ms + RMS_EPS).sqrt();
                    let dot: f64 = grow.iter().zip(yrow).map(|(g, y)| g * y).sum::<f64>()
                        / cols as f64;
                    // Exact even with eps: since y = x*inv identically,
                    // dx = inv * (dy - y * mean(dy .* y)).
                    for c in 0..cols {
                        ga.data[r * cols + c] += inv * (grow[c] - yrow[c] * dot);
                    }
                }
            }
            Op::Mha {
                q,
                k,
                v,
                heads,
                probs,
            } => {
                let (q, k, v, heads) = (*q, *k, *v, *heads);
                let probs: Vec<Mat> = probs.clone();
                let mq = self.value(q).clone();
                let mk = self.value(k).clone();
                let mv = self.value(v).clone();
                let n = mq.rows;
                let hd = mq.cols / heads;
                let scale = 1.0 / (hd as f64).sqrt();
                let mut gq = Mat::zeros(n, mq.cols);
                let mut gk = Mat::zeros(n, mq.cols);
                let mut gv = Mat::zeros(n, mq.cols);
                for h in 0..heads {
                    let off = h * hd;
                    let p = &probs[h];
                    for qi in 0..n {
                        let grow = &gout.data[qi * mq.cols + off..qi * mq.cols + off + hd];
                        // dP[qi, ki] = dOut_row . V_h[ki]
                        let mut dp = vec![0.0; n];
                        let mut active = false;
                        for ki in 0..n {
                            if p.data[qi * n + ki] != 0.0 {
                                active = true;
                                let vrow = &mv.data[ki * mv.cols + off..ki * mv.cols + off + hd];
                                dp[ki] = grow.iter().zip(vrow).map(|(a, b)| a * b).sum();
                                // dV_h[ki] += P[qi,ki] * dOut_row
                                let w = p.data[qi * n + ki];
                                for c in 0..hd {
                                    gv.data[ki * mq.cols + off + c] += w * grow[c];
                                }
                            }
                        }
                        if !active {
                            continue;
                        }
                        // Softmax backward: dS = P .* (dP - sum(dP .* P))
                        let dot: f64 = (0..n).map(|ki| dp[ki] * p.data[qi * n + ki]).sum();
                        for ki in 0..n {
                            let pv = p.data[qi * n + ki];
                            if pv == 0.0 {
                                continue;
                            }
                            let ds = pv * (dp[ki] - dot) * scale;
                            // dQ[qi] += dS * K[ki]; dK[ki] += dS * Q[qi]
                            let krow = &mk.data[ki * mk.cols + off..ki * mk.cols + off + hd];
                            let qrow = &mq.data[qi * mq.cols + off..qi * mq.cols + off + hd];
                            for c in 0..hd {
                                gq.data[qi * mq.cols + off + c] += ds * krow[c];
                                gk.data[ki * mq.cols + off + c] += ds * qrow[c];
                            }
                        }
                    }
                }
                self.grad_mut(q).add_in_place(&gq);
                self.grad_mut(k).add_in_place(&gk);
                self.grad_mut(v).add_in_place(&gv);
            }
            Op::Embed { table, ids } => {
                let table = *table;
                let ids = ids.clone();
                let cols = gout.cols;
                let gt = self.grad_mut(table);
                for (r, &id) in ids.iter().enumerate() {
                    let id = id as usize;
                    for c in 0..cols {
                        gt.data[id * cols + c] += gout.data[r * cols + c];
                    }
                }
            }
            Op::Gather { a, rows } => {
                let a = *a;
                let rows = rows.clone();
                let cols = gout.cols;
                let ga = self.grad_mut(a);
                for (r, &src) in rows.iter().enumerate() {
                    for c in 0..cols {
                        ga.data[src * cols + c] += gout.data[r * cols + c];
                    }
                }
            }
            Op::Concat(a, b) => {
                let (a, b) = (*a, *b);
                let ra = self.value(a).rows;
                let cols = gout.cols;
                {
                    let ga = self.grad_mut(a);
                    ga.data.iter_mut().zip(&gout.data[..ra * cols]).for_each(|(g, &d)| *g += d);
                }
                {
                    let gb = self.grad_mut(b);
                    gb.data.iter_mut().zip(&gout.data[ra * cols..]).for_each(|(g, &d)| *g += d);
                }
            }
            Op::CrossEntropy {
                logits,
                targets,
                softmax,
            } => {
                let logits = *logits;
                let targets = targets.clone();
                let softmax = softmax.clone();
                let g = gout.data[0];
                let gl = self.grad_mut(logits);
                let cols = softmax.cols;
                for (r, &t) in targets.iter().enumerate() {
                    for c in 0..cols {
                        let onehot = if c == t as usize { 1.0 } else { 0.0 };
                        gl.data[r * cols + c] += g * (softmax.data[r * cols + c] - onehot);
                    }
                }
            }
            Op::SumSq { a, target } => {
                let a = *a;
                let target = target.clone();
                let g = gout.data[0];
                let va = self.value(a).clone();
                let ga = self.grad_mut(a);
                for idx in 0..va.data.len() {
                    ga.data[idx] += g * 2.0 * (va.data[idx] - target.data[idx]);
                }
            }
        }
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}
