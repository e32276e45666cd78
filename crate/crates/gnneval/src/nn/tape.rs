//! Tape-based reverse-mode differentiation over a closed set of layers.
//!
//! This is not a general autodiff system: the only operations are the ones
//! the model zoo and the evaluator need (affine maps, ReLU/LeakyReLU, sparse
//! aggregation, column concatenation, single-head attention, mean pooling),
//! plus two fused loss heads ([`softmax_ce`], [`sigmoid_mse`]) that produce
//! the seed gradient analytically. Keeping the set closed means every
//! backward rule is hand-derived and individually covered by finite
//! difference checks.
//!
//! Forward calls append nodes to the [`Tape`]; node ids are creation-ordered,
//! so walking them in reverse is already a topological order for backward.
//! Gradients only flow into nodes that (transitively) depend on a parameter.

use std::sync::Arc;

use super::params::{GradMap, ParamStore};
use super::sparse::SparseMatrix;
use super::tensor::Tensor2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(String),
    /// `x·w` with an optional broadcast row bias.
    Dense {
        x: NodeId,
        w: NodeId,
        b: Option<NodeId>,
    },
    /// `x + b` with `b` a `1×cols` row vector (bias added after aggregation).
    AddRowBias { x: NodeId, b: NodeId },
    Relu { x: NodeId },
    LeakyRelu { x: NodeId, slope: f64 },
    /// `a·x` with a fixed sparse matrix; only the transpose is kept, for
    /// backward (`dX = Aᵀ·dY`).
    SpMm { a_t: Arc<SparseMatrix>, x: NodeId },
    Concat { a: NodeId, b: NodeId },
    /// Single-head attention: for each node `u` and neighbor `v` (a row of
    /// `nbrs`, self included), logits `LeakyReLU(h_u·a_src + h_v·a_dst)` are
    /// softmax-normalized over `v` and the output is the weighted sum of the
    /// `h_v`. `alpha`/`pre` cache the forward weights and pre-activation
    /// logits in the CSR layout of `nbrs`.
    Attention {
        h: NodeId,
        a_src: NodeId,
        a_dst: NodeId,
        nbrs: Arc<SparseMatrix>,
        slope: f64,
        alpha: Vec<f64>,
        pre: Vec<f64>,
    },
    /// Column means over all rows: `n×d → 1×d`.
    MeanPool { x: NodeId },
}

struct TapeNode {
    value: Tensor2,
    needs_grad: bool,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<TapeNode>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&self, id: NodeId) -> &Tensor2 {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Tensor2, needs_grad: bool, op: Op) -> NodeId {
        debug_assert!(value.is_finite(), "non-finite forward value");
        self.nodes.push(TapeNode {
            value,
            needs_grad,
            op,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    /// Constant input; gradients are not propagated into it.
    pub fn input(&mut self, value: Tensor2) -> NodeId {
        self.push(value, false, Op::Input)
    }

    /// Parameter leaf; the current value is copied from the store.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> NodeId {
        self.push(store.get(name).clone(), true, Op::Param(name.to_string()))
    }

    pub fn dense(&mut self, x: NodeId, w: NodeId, b: Option<NodeId>) -> NodeId {
        let mut value = self.value(x).matmul(self.value(w));
        if let Some(b) = b {
            value = value.add_row_broadcast(self.value(b));
        }
        let needs = self.needs(x) || self.needs(w) || b.is_some_and(|b| self.needs(b));
        self.push(value, needs, Op::Dense { x, w, b })
    }

    pub fn add_row_bias(&mut self, x: NodeId, b: NodeId) -> NodeId {
        let value = self.value(x).add_row_broadcast(self.value(b));
        let needs = self.needs(x) || self.needs(b);
        self.push(value, needs, Op::AddRowBias { x, b })
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(|v| v.max(0.0));
        let needs = self.needs(x);
        self.push(value, needs, Op::Relu { x })
    }

    pub fn leaky_relu(&mut self, x: NodeId, slope: f64) -> NodeId {
        let value = self.value(x).map(|v| if v > 0.0 { v } else { slope * v });
        let needs = self.needs(x);
        self.push(value, needs, Op::LeakyRelu { x, slope })
    }

    pub fn spmm(&mut self, a: &SparseMatrix, a_t: Arc<SparseMatrix>, x: NodeId) -> NodeId {
        let value = a.matmul(self.value(x));
        let needs = self.needs(x);
        self.push(value, needs, Op::SpMm { a_t, x })
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.value(a).concat_cols(self.value(b));
        let needs = self.needs(a) || self.needs(b);
        self.push(value, needs, Op::Concat { a, b })
    }

    /// Attention over `nbrs` rows. `h` is `n×f`; `a_src` and `a_dst` are
    /// `f×1` projection vectors. Every row of `nbrs` must be nonempty.
    pub fn attention(
        &mut self,
        h: NodeId,
        a_src: NodeId,
        a_dst: NodeId,
        nbrs: Arc<SparseMatrix>,
        slope: f64,
    ) -> NodeId {
        let hv = self.value(h);
        let n = hv.rows();
        let f = hv.cols();
        assert_eq!(nbrs.rows(), n);
        assert_eq!(self.value(a_src).shape(), (f, 1));
        assert_eq!(self.value(a_dst).shape(), (f, 1));

        let s = hv.matmul(self.value(a_src)); // n×1: source term per node
        let t = hv.matmul(self.value(a_dst)); // n×1: destination term per node

        let mut alpha = vec![0.0; nbrs.nnz()];
        let mut pre = vec![0.0; nbrs.nnz()];
        let mut out = Tensor2::zeros(n, f);
        let mut edge = 0;
        for u in 0..n {
            let (cols, _) = nbrs.row(u);
            assert!(!cols.is_empty(), "attention row {u} has no neighbors");
            let base = edge;
            let mut max_e = f64::NEG_INFINITY;
            for &v in cols {
                let z = s.get(u, 0) + t.get(v as usize, 0);
                let e = if z > 0.0 { z } else { slope * z };
                pre[edge] = z;
                alpha[edge] = e;
                max_e = max_e.max(e);
                edge += 1;
            }
            let mut total = 0.0;
            for a in &mut alpha[base..edge] {
                *a = (*a - max_e).exp();
                total += *a;
            }
            let out_row = out.row_mut(u);
            for (i, &v) in cols.iter().enumerate() {
                alpha[base + i] /= total;
                let w = alpha[base + i];
                for (o, &hval) in out_row.iter_mut().zip(hv.row(v as usize)) {
                    *o += w * hval;
                }
            }
        }

        let needs = self.needs(h) || self.needs(a_src) || self.needs(a_dst);
        self.push(
            out,
            needs,
            Op::Attention {
                h,
                a_src,
                a_dst,
                nbrs,
                slope,
                alpha,
                pre,
            },
        )
    }

    pub fn mean_pool(&mut self, x: NodeId) -> NodeId {
        let xv = self.value(x);
        let value = xv.sum_rows().scale(1.0 / xv.rows() as f64);
        let needs = self.needs(x);
        self.push(value, needs, Op::MeanPool { x })
    }

    /// Propagates `seed` (the loss gradient with respect to `output`) back to
    /// every parameter the output depends on. Parameters the output does not
    /// touch are absent from the result and read as zero.
    pub fn backward(&self, output: NodeId, seed: Tensor2) -> GradMap {
        assert_eq!(seed.shape(), self.value(output).shape(), "seed shape");
        let mut grads: Vec<Option<Tensor2>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(seed);
        let mut out = GradMap::new();

        for id in (0..=output.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            if !self.nodes[id].needs_grad {
                continue;
            }
            match &self.nodes[id].op {
                Op::Input => {}
                Op::Param(name) => match out.entry(name.clone()) {
                    std::collections::btree_map::Entry::Vacant(e) => {
                        e.insert(g);
                    }
                    std::collections::btree_map::Entry::Occupied(mut e) => {
                        e.get_mut().add_assign(&g);
                    }
                },
                Op::Dense { x, w, b } => {
                    if self.needs(*x) {
                        acc(&mut grads[x.0], g.matmul_nt(self.value(*w)));
                    }
                    if self.needs(*w) {
                        acc(&mut grads[w.0], self.value(*x).matmul_tn(&g));
                    }
                    if let Some(b) = b {
                        if self.needs(*b) {
                            acc(&mut grads[b.0], g.sum_rows());
                        }
                    }
                }
                Op::AddRowBias { x, b } => {
                    if self.needs(*b) {
                        acc(&mut grads[b.0], g.sum_rows());
                    }
                    if self.needs(*x) {
                        acc(&mut grads[x.0], g);
                    }
                }
                Op::Relu { x } => {
                    if self.needs(*x) {
                        let xv = self.value(*x);
                        let mut gx = g;
                        for (gi, &xi) in gx.data_mut().iter_mut().zip(xv.data()) {
                            if xi <= 0.0 {
                                *gi = 0.0;
                            }
                        }
                        acc(&mut grads[x.0], gx);
                    }
                }
                Op::LeakyRelu { x, slope } => {
                    if self.needs(*x) {
                        let xv = self.value(*x);
                        let mut gx = g;
                        for (gi, &xi) in gx.data_mut().iter_mut().zip(xv.data()) {
                            if xi <= 0.0 {
                                *gi *= slope;
                            }
                        }
                        acc(&mut grads[x.0], gx);
                    }
                }
                Op::SpMm { a_t, x, .. } => {
                    if self.needs(*x) {
                        acc(&mut grads[x.0], a_t.matmul(&g));
                    }
                }
                Op::Concat { a, b } => {
                    let ac = self.value(*a).cols();
                    if self.needs(*a) {
                        let mut ga = Tensor2::zeros(g.rows(), ac);
                        for r in 0..g.rows() {
                            ga.row_mut(r).copy_from_slice(&g.row(r)[..ac]);
                        }
                        acc(&mut grads[a.0], ga);
                    }
                    if self.needs(*b) {
                        let bc = g.cols() - ac;
                        let mut gb = Tensor2::zeros(g.rows(), bc);
                        for r in 0..g.rows() {
                            gb.row_mut(r).copy_from_slice(&g.row(r)[ac..]);
                        }
                        acc(&mut grads[b.0], gb);
                    }
                }
                Op::Attention {
                    h,
                    a_src,
                    a_dst,
                    nbrs,
                    slope,
                    alpha,
                    pre,
                } => {
                    let hv = self.value(*h);
                    let (n, f) = hv.shape();
                    let mut dh = Tensor2::zeros(n, f);
                    let mut ds = vec![0.0; n];
                    let mut dt = vec![0.0; n];
                    let mut edge = 0;
                    for u in 0..n {
                        let (cols, _) = nbrs.row(u);
                        let base = edge;
                        let g_row = g.row(u);
                        // dL/dα_uv and the softmax Jacobian term.
                        let mut dalpha = Vec::with_capacity(cols.len());
                        let mut dot_sum = 0.0;
                        for (i, &v) in cols.iter().enumerate() {
                            let h_row = hv.row(v as usize);
                            let da: f64 = g_row.iter().zip(h_row).map(|(a, b)| a * b).sum();
                            dot_sum += alpha[base + i] * da;
                            dalpha.push(da);
                        }
                        for (i, &v) in cols.iter().enumerate() {
                            let a_uv = alpha[base + i];
                            let de = a_uv * (dalpha[i] - dot_sum);
                            let dz = if pre[base + i] > 0.0 { de } else { slope * de };
                            ds[u] += dz;
                            dt[v as usize] += dz;
                            // Weighted-sum path into h_v.
                            let dh_row = dh.row_mut(v as usize);
                            for (o, &gv) in dh_row.iter_mut().zip(g_row) {
                                *o += a_uv * gv;
                            }
                            edge += 1;
                        }
                    }
                    // s = h·a_src and t = h·a_dst contribute to h and to the
                    // projection vectors.
                    let asv = self.value(*a_src);
                    let adv = self.value(*a_dst);
                    let mut da_src = Tensor2::zeros(f, 1);
                    let mut da_dst = Tensor2::zeros(f, 1);
                    for u in 0..n {
                        let h_row = hv.row(u);
                        let dh_row = dh.row_mut(u);
                        for i in 0..f {
                            dh_row[i] += ds[u] * asv.get(i, 0) + dt[u] * adv.get(i, 0);
                            da_src.data_mut()[i] += ds[u] * h_row[i];
                            da_dst.data_mut()[i] += dt[u] * h_row[i];
                        }
                    }
                    if self.needs(*h) {
                        acc(&mut grads[h.0], dh);
                    }
                    if self.needs(*a_src) {
                        acc(&mut grads[a_src.0], da_src);
                    }
                    if self.needs(*a_dst) {
                        acc(&mut grads[a_dst.0], da_dst);
                    }
                }
                Op::MeanPool { x } => {
                    if self.needs(*x) {
                        let xv = self.value(*x);
                        let scale = 1.0 / xv.rows() as f64;
                        let mut gx = Tensor2::zeros(xv.rows(), xv.cols());
                        for r in 0..xv.rows() {
                            for (o, gv) in gx.row_mut(r).iter_mut().zip(g.row(0)) {
                                *o = gv * scale;
                            }
                        }
                        acc(&mut grads[x.0], gx);
                    }
                }
            }
        }
        out
    }
}

fn acc(slot: &mut Option<Tensor2>, g: Tensor2) {
    match slot {
        Some(existing) => existing.add_assign(&g),
        None => *slot = Some(g),
    }
}

/// Numerically stable row-wise softmax.
pub fn softmax_rows(logits: &Tensor2) -> Tensor2 {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    out
}

/// Fused softmax + cross-entropy head, averaged over the rows in `mask`.
///
/// Returns the loss and its gradient with respect to the logits
/// (`(softmax − onehot)/|mask|` on masked rows, zero elsewhere).
pub fn softmax_ce(logits: &Tensor2, labels: &[i64], mask: &[usize]) -> (f64, Tensor2) {
    assert_eq!(logits.rows(), labels.len());
    assert!(!mask.is_empty(), "empty loss mask");
    let probs = softmax_rows(logits);
    let scale = 1.0 / mask.len() as f64;
    let mut grad = Tensor2::zeros(logits.rows(), logits.cols());
    let mut loss = 0.0;
    for &r in mask {
        let y = labels[r];
        assert!(
            y >= 0 && (y as usize) < logits.cols(),
            "row {r} has no usable label ({y})"
        );
        let p = probs.get(r, y as usize);
        loss -= (p.max(1e-300)).ln();
        let grad_row = grad.row_mut(r);
        for (c, &pv) in probs.row(r).iter().enumerate() {
            grad_row[c] = (pv - if c == y as usize { 1.0 } else { 0.0 }) * scale;
        }
    }
    (loss * scale, grad)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Fused sigmoid + squared-error head over a `k×1` column of raw scores.
///
/// Loss is the mean of `(sigmoid(raw_i) − target_i)²`; the returned gradient
/// is with respect to the raw scores.
pub fn sigmoid_mse(raw: &Tensor2, targets: &[f64]) -> (f64, Tensor2) {
    assert_eq!(raw.cols(), 1);
    assert_eq!(raw.rows(), targets.len());
    assert!(!targets.is_empty());
    let scale = 1.0 / targets.len() as f64;
    let mut grad = Tensor2::zeros(raw.rows(), 1);
    let mut loss = 0.0;
    for i in 0..targets.len() {
        let p = sigmoid(raw.get(i, 0));
        let diff = p - targets[i];
        loss += diff * diff;
        grad.set(i, 0, 2.0 * diff * p * (1.0 - p) * scale);
    }
    (loss * scale, grad)
}
