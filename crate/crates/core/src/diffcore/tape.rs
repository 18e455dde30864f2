use std::ops::Deref;

use super::tensor::{log_sum_exp, matmul_nn, matmul_nt, matmul_tn, Tensor};
use crate::error::{Error, Result};

const LAYER_NORM_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_K: f64 = 0.044_715;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

enum Value<'a> {
    Borrowed(&'a Tensor),
    Owned(Tensor),
}

impl Deref for Value<'_> {
    type Target = Tensor;

    fn deref(&self) -> &Tensor {
        match self {
            Value::Borrowed(t) => t,
            Value::Owned(t) => t,
        }
    }
}

enum Op {
    Leaf {
        slot: Option<usize>,
    },
    MatMul {
        a: Var,
        b: Var,
    },
    MatMulNt {
        a: Var,
        b: Var,
    },
    Add {
        a: Var,
        b: Var,
    },
    AddRow {
        a: Var,
        row: Var,
    },
    Scale {
        a: Var,
        k: f64,
    },
    Gelu {
        a: Var,
    },
    Softmax {
        a: Var,
    },
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Embedding {
        table: Var,
        ids: Vec<usize>,
    },
    SliceCols {
        a: Var,
        start: usize,
    },
    ConcatCols {
        parts: Vec<Var>,
    },
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        rows: Vec<usize>,
        probs: Vec<f64>,
    },
    KlDivergence {
        logits: Var,
        rows: Vec<usize>,
        probs: Vec<f64>,
        coef: Vec<f64>,
    },
}

struct Node<'a> {
    value: Value<'a>,
    op: Op,
    requires_grad: bool,
}

/// Gradients of a scalar with respect to the parameter slots registered on
/// a tape. Slots that never influenced the loss hold `None`.
#[derive(Debug, Clone)]
pub struct Gradients {
    slots: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, slot: usize) -> Option<&Tensor> {
        self.slots.get(slot).and_then(|s| s.as_ref())
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn into_slots(self) -> Vec<Option<Tensor>> {
        self.slots
    }
}

/// Record of primitive operations for one forward pass.
///
/// Nodes are appended in execution order, so the record is already
/// topologically sorted and the reverse pass is a single backward sweep.
/// A tape borrows the parameter tensors it reads; it is consumed by
/// [`Tape::backward`] and never shared between threads.
#[derive(Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
    n_slots: usize,
}

fn mismatch(op: &'static str, left: &Tensor, right: &Tensor) -> Error {
    Error::ShapeMismatch {
        op,
        left: left.shape().to_vec(),
        right: right.shape().to_vec(),
    }
}

fn require_matrix(op: &'static str, t: &Tensor) -> Result<()> {
    if t.is_matrix() {
        Ok(())
    } else {
        Err(Error::ShapeMismatch {
            op,
            left: t.shape().to_vec(),
            right: vec![],
        })
    }
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Value<'a>, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push_op(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let rg = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.push(Value::Owned(value), op, rg)
    }

    /// Trainable leaf. Its gradient is reported under `slot`.
    pub fn param(&mut self, t: &'a Tensor, slot: usize) -> Var {
        self.n_slots = self.n_slots.max(slot + 1);
        self.push(Value::Borrowed(t), Op::Leaf { slot: Some(slot) }, true)
    }

    /// Non-trainable leaf borrowed from the caller (e.g. frozen weights).
    pub fn frozen(&mut self, t: &'a Tensor) -> Var {
        self.push(Value::Borrowed(t), Op::Leaf { slot: None }, false)
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(Value::Owned(t), Op::Leaf { slot: None }, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        require_matrix("matmul", ta)?;
        require_matrix("matmul", tb)?;
        if ta.cols() != tb.rows() {
            return Err(mismatch("matmul", ta, tb));
        }
        let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
        let out = Tensor::from_parts(m, n, matmul_nn(ta.data(), tb.data(), m, k, n));
        Ok(self.push_op(out, Op::MatMul { a, b }, &[a, b]))
    }

    /// `a · bᵀ`
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        require_matrix("matmul_nt", ta)?;
        require_matrix("matmul_nt", tb)?;
        if ta.cols() != tb.cols() {
            return Err(mismatch("matmul_nt", ta, tb));
        }
        let (m, k, n) = (ta.rows(), ta.cols(), tb.rows());
        let out = Tensor::from_parts(m, n, matmul_nt(ta.data(), tb.data(), m, k, n));
        Ok(self.push_op(out, Op::MatMulNt { a, b }, &[a, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(mismatch("add", ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x + y).collect();
        let out = Tensor::from_parts(ta.rows(), ta.cols(), data);
        Ok(self.push_op(out, Op::Add { a, b }, &[a, b]))
    }

    /// Adds a `1×n` row to every row of an `m×n` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (ta, tr) = (self.value(a), self.value(row));
        require_matrix("add_row", ta)?;
        if tr.rows() != 1 || tr.cols() != ta.cols() {
            return Err(mismatch("add_row", ta, tr));
        }
        let n = ta.cols();
        let mut data = ta.data().to_vec();
        for chunk in data.chunks_mut(n) {
            for (x, r) in chunk.iter_mut().zip(tr.data()) {
                *x += r;
            }
        }
        let out = Tensor::from_parts(ta.rows(), n, data);
        Ok(self.push_op(out, Op::AddRow { a, row }, &[a, row]))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let ta = self.value(a);
        let data = ta.data().iter().map(|x| x * k).collect();
        let out = Tensor::from_parts(ta.rows(), ta.cols(), data);
        self.push_op(out, Op::Scale { a, k }, &[a])
    }

    /// GELU, tanh form.
    pub fn gelu(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let data = ta
            .data()
            .iter()
            .map(|&x| 0.5 * x * (1.0 + (GELU_C * (x + GELU_K * x * x * x)).tanh()))
            .collect();
        let out = Tensor::from_parts(ta.rows(), ta.cols(), data);
        self.push_op(out, Op::Gelu { a }, &[a])
    }

    fn softmax_impl(&mut self, a: Var, causal: bool) -> Result<Var> {
        let ta = self.value(a);
        require_matrix("softmax_rows", ta)?;
        let (rows, cols) = (ta.rows(), ta.cols());
        if causal && rows != cols {
            return Err(mismatch("causal_softmax_rows", ta, ta));
        }
        let mut data = vec![0.0; rows * cols];
        for r in 0..rows {
            let width = if causal { r + 1 } else { cols };
            let src = &ta.row(r)[..width];
            let max = src.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let dst = &mut data[r * cols..r * cols + width];
            let mut sum = 0.0;
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = (s - max).exp();
                sum += *d;
            }
            for d in dst.iter_mut() {
                *d /= sum;
            }
        }
        let out = Tensor::from_parts(rows, cols, data);
        Ok(self.push_op(out, Op::Softmax { a }, &[a]))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        self.softmax_impl(a, false)
    }

    /// Row softmax of a square score matrix where row `i` only sees
    /// columns `0..=i`; masked entries are exactly zero.
    pub fn causal_softmax_rows(&mut self, a: Var) -> Result<Var> {
        self.softmax_impl(a, true)
    }

    pub fn layer_norm_rows(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        let (tx, tg, tb) = (self.value(x), self.value(gain), self.value(bias));
        require_matrix("layer_norm_rows", tx)?;
        let n = tx.cols();
        if tg.rows() != 1 || tg.cols() != n {
            return Err(mismatch("layer_norm_rows", tx, tg));
        }
        if tb.rows() != 1 || tb.cols() != n {
            return Err(mismatch("layer_norm_rows", tx, tb));
        }
        let rows = tx.rows();
        let mut xhat = Vec::with_capacity(rows * n);
        let mut inv_std = Vec::with_capacity(rows);
        let mut data = Vec::with_capacity(rows * n);
        for r in 0..rows {
            let row = tx.row(r);
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            inv_std.push(is);
            for (j, &v) in row.iter().enumerate() {
                let h = (v - mean) * is;
                xhat.push(h);
                data.push(h * tg.data()[j] + tb.data()[j]);
            }
        }
        let out = Tensor::from_parts(rows, n, data);
        Ok(self.push_op(
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
            &[x, gain, bias],
        ))
    }

    /// Gathers rows of `table` by index.
    pub fn embedding_lookup(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let tt = self.value(table);
        require_matrix("embedding_lookup", tt)?;
        if ids.is_empty() {
            return Err(Error::EmptySequence);
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= tt.rows()) {
            return Err(Error::TokenOutOfRange {
                id: bad as u32,
                vocab_size: tt.rows(),
            });
        }
        let n = tt.cols();
        let mut data = Vec::with_capacity(ids.len() * n);
        for &i in ids {
            data.extend_from_slice(tt.row(i));
        }
        let out = Tensor::from_parts(ids.len(), n, data);
        Ok(self.push_op(
            out,
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
            &[table],
        ))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let ta = self.value(a);
        require_matrix("slice_cols", ta)?;
        if len == 0 || start + len > ta.cols() {
            return Err(Error::ShapeMismatch {
                op: "slice_cols",
                left: ta.shape().to_vec(),
                right: vec![start, len],
            });
        }
        let mut data = Vec::with_capacity(ta.rows() * len);
        for r in 0..ta.rows() {
            data.extend_from_slice(&ta.row(r)[start..start + len]);
        }
        let out = Tensor::from_parts(ta.rows(), len, data);
        Ok(self.push_op(out, Op::SliceCols { a, start }, &[a]))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or(Error::EmptySequence)?;
        let rows = self.value(*first).rows();
        let mut total = 0;
        for p in parts {
            let t = self.value(*p);
            require_matrix("concat_cols", t)?;
            if t.rows() != rows {
                return Err(mismatch("concat_cols", self.value(*first), t));
            }
            total += t.cols();
        }
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for p in parts {
                data.extend_from_slice(self.value(*p).row(r));
            }
        }
        let out = Tensor::from_parts(rows, total, data);
        Ok(self.push_op(out, Op::ConcatCols { parts: parts.to_vec() }, parts))
    }

    /// Mean negative log-likelihood of `targets` over rows where `mask` is
    /// true. Returns a `1×1` scalar.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize], mask: &[bool]) -> Result<Var> {
        let tl = self.value(logits);
        require_matrix("cross_entropy", tl)?;
        let (t, v) = (tl.rows(), tl.cols());
        if targets.len() != t || mask.len() != t {
            return Err(Error::ShapeMismatch {
                op: "cross_entropy",
                left: tl.shape().to_vec(),
                right: vec![targets.len(), mask.len()],
            });
        }
        let rows: Vec<usize> = (0..t).filter(|&r| mask[r]).collect();
        if rows.is_empty() {
            return Err(Error::EmptyMask);
        }
        let mut probs = Vec::with_capacity(rows.len() * v);
        let mut total = 0.0;
        let mut kept_targets = Vec::with_capacity(rows.len());
        for &r in &rows {
            let target = targets[r];
            if target >= v {
                return Err(Error::TokenOutOfRange {
                    id: target as u32,
                    vocab_size: v,
                });
            }
            let row = tl.row(r);
            let lse = log_sum_exp(row);
            total += lse - row[target];
            probs.extend(row.iter().map(|&x| (x - lse).exp()));
            kept_targets.push(target);
        }
        let out = Tensor::scalar(total / rows.len() as f64);
        Ok(self.push_op(
            out,
            Op::CrossEntropy {
                logits,
                targets: kept_targets,
                rows,
                probs,
            },
            &[logits],
        ))
    }

    /// Mean over masked rows of `KL(softmax(logits) ‖ reference)`, with the
    /// reference given as log-probabilities of the same shape.
    pub fn kl_divergence(&mut self, logits: Var, reference_log_probs: &Tensor, mask: &[bool]) -> Result<Var> {
        let tl = self.value(logits);
        require_matrix("kl_divergence", tl)?;
        if tl.shape() != reference_log_probs.shape() {
            return Err(mismatch("kl_divergence", tl, reference_log_probs));
        }
        let (t, v) = (tl.rows(), tl.cols());
        if mask.len() != t {
            return Err(Error::ShapeMismatch {
                op: "kl_divergence",
                left: tl.shape().to_vec(),
                right: vec![mask.len()],
            });
        }
        let rows: Vec<usize> = (0..t).filter(|&r| mask[r]).collect();
        if rows.is_empty() {
            return Err(Error::EmptyMask);
        }
        let mut probs = Vec::with_capacity(rows.len() * v);
        let mut coef = Vec::with_capacity(rows.len() * v);
        let mut total = 0.0;
        for &r in &rows {
            let row = tl.row(r);
            let q = reference_log_probs.row(r);
            let lse = log_sum_exp(row);
            let start = coef.len();
            let mut kl = 0.0;
            for (&x, &lq) in row.iter().zip(q) {
                let lp = x - lse;
                let p = lp.exp();
                let d = lp - lq;
                if p > 0.0 {
                    kl += p * d;
                }
                probs.push(p);
                coef.push(d);
            }
            for c in &mut coef[start..] {
                *c -= kl;
            }
            total += kl;
        }
        let out = Tensor::scalar(total / rows.len() as f64);
        Ok(self.push_op(
            out,
            Op::KlDivergence {
                logits,
                rows,
                probs,
                coef,
            },
            &[logits],
        ))
    }

    /// Reverse sweep from `loss`; returns gradients for every parameter
    /// slot registered with [`Tape::param`].
    pub fn backward(self, loss: Var) -> Result<Gradients> {
        if self.nodes.is_empty() {
            return Err(Error::EmptyTape);
        }
        let lt = self.value(loss);
        if lt.len() != 1 {
            return Err(Error::NonScalarLoss(lt.shape().to_vec()));
        }
        let mut slots = vec![None; self.n_slots];
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let out = &node.value;
            match &node.op {
                Op::Leaf { slot } => {
                    if let Some(s) = slot {
                        slots[*s] = Some(Tensor::from_parts(out.rows(), out.cols(), g));
                    }
                }
                Op::MatMul { a, b } => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                    if self.needs(*a) {
                        let ga = matmul_nt(&g, tb.data(), m, n, k);
                        self.accumulate(&mut grads, *a, ga);
                    }
                    if self.needs(*b) {
                        let gb = matmul_tn(ta.data(), &g, m, k, n);
                        self.accumulate(&mut grads, *b, gb);
                    }
                }
                Op::MatMulNt { a, b } => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let (m, k, n) = (ta.rows(), ta.cols(), tb.rows());
                    if self.needs(*a) {
                        let ga = matmul_nn(&g, tb.data(), m, n, k);
                        self.accumulate(&mut grads, *a, ga);
                    }
                    if self.needs(*b) {
                        let gb = matmul_tn(&g, ta.data(), m, n, k);
                        self.accumulate(&mut grads, *b, gb);
                    }
                }
                Op::Add { a, b } => {
                    if self.needs(*a) {
                        self.accumulate(&mut grads, *a, g.clone());
                    }
                    if self.needs(*b) {
                        self.accumulate(&mut grads, *b, g);
                    }
                }
                Op::AddRow { a, row } => {
                    if self.needs(*row) {
                        let n = out.cols();
                        let mut gr = vec![0.0; n];
                        for chunk in g.chunks(n) {
                            for (acc, x) in gr.iter_mut().zip(chunk) {
                                *acc += x;
                            }
                        }
                        self.accumulate(&mut grads, *row, gr);
                    }
                    if self.needs(*a) {
                        self.accumulate(&mut grads, *a, g);
                    }
                }
                Op::Scale { a, k } => {
                    let ga = g.iter().map(|x| x * k).collect();
                    self.accumulate(&mut grads, *a, ga);
                }
                Op::Gelu { a } => {
                    let ta = self.value(*a);
                    let ga = ta
                        .data()
                        .iter()
                        .zip(&g)
                        .map(|(&x, &gy)| {
                            let u = GELU_C * (x + GELU_K * x * x * x);
                            let t = u.tanh();
                            let du = GELU_C * (1.0 + 3.0 * GELU_K * x * x);
                            gy * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du)
                        })
                        .collect();
                    self.accumulate(&mut grads, *a, ga);
                }
                Op::Softmax { a } => {
                    let n = out.cols();
                    let mut ga = vec![0.0; g.len()];
                    for r in 0..out.rows() {
                        let y = out.row(r);
                        let gy = &g[r * n..(r + 1) * n];
                        let dot: f64 = y.iter().zip(gy).map(|(a, b)| a * b).sum();
                        for j in 0..n {
                            ga[r * n + j] = y[j] * (gy[j] - dot);
                        }
                    }
                    self.accumulate(&mut grads, *a, ga);
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    xhat,
                    inv_std,
                } => {
                    let n = out.cols();
                    let rows = out.rows();
                    let tg = self.value(*gain);
                    if self.needs(*gain) {
                        let mut gg = vec![0.0; n];
                        for r in 0..rows {
                            for j in 0..n {
                                gg[j] += g[r * n + j] * xhat[r * n + j];
                            }
                        }
                        self.accumulate(&mut grads, *gain, gg);
                    }
                    if self.needs(*bias) {
                        let mut gb = vec![0.0; n];
                        for chunk in g.chunks(n) {
                            for (acc, v) in gb.iter_mut().zip(chunk) {
                                *acc += v;
                            }
                        }
                        self.accumulate(&mut grads, *bias, gb);
                    }
                    if self.needs(*x) {
                        let mut gx = vec![0.0; rows * n];
                        for r in 0..rows {
                            let mut mean_d = 0.0;
                            let mut mean_dx = 0.0;
                            for j in 0..n {
                                let d = g[r * n + j] * tg.data()[j];
                                mean_d += d;
                                mean_dx += d * xhat[r * n + j];
                            }
                            mean_d /= n as f64;
                            mean_dx /= n as f64;
                            for j in 0..n {
                                let d = g[r * n + j] * tg.data()[j];
                                gx[r * n + j] = inv_std[r] * (d - mean_d - xhat[r * n + j] * mean_dx);
                            }
                        }
                        self.accumulate(&mut grads, *x, gx);
                    }
                }
                Op::Embedding { table, ids } => {
                    let tt = self.value(*table);
                    let n = tt.cols();
                    let mut gt = vec![0.0; tt.len()];
                    for (pos, &id) in ids.iter().enumerate() {
                        for j in 0..n {
                            gt[id * n + j] += g[pos * n + j];
                        }
                    }
                    self.accumulate(&mut grads, *table, gt);
                }
                Op::SliceCols { a, start } => {
                    let ta = self.value(*a);
                    let (n, w) = (ta.cols(), out.cols());
                    let mut ga = vec![0.0; ta.len()];
                    for r in 0..ta.rows() {
                        ga[r * n + start..r * n + start + w].copy_from_slice(&g[r * w..(r + 1) * w]);
                    }
                    self.accumulate(&mut grads, *a, ga);
                }
                Op::ConcatCols { parts } => {
                    let total = out.cols();
                    let mut offset = 0;
                    for p in parts {
                        let w = self.value(*p).cols();
                        if self.needs(*p) {
                            let mut gp = Vec::with_capacity(out.rows() * w);
                            for r in 0..out.rows() {
                                gp.extend_from_slice(&g[r * total + offset..r * total + offset + w]);
                            }
                            self.accumulate(&mut grads, *p, gp);
                        }
                        offset += w;
                    }
                }
                Op::CrossEntropy {
                    logits,
                    targets,
                    rows,
                    probs,
                } => {
                    let tl = self.value(*logits);
                    let v = tl.cols();
                    let scale = g[0] / rows.len() as f64;
                    let mut gl = vec![0.0; tl.len()];
                    for (i, (&r, &t)) in rows.iter().zip(targets).enumerate() {
                        let dst = &mut gl[r * v..(r + 1) * v];
                        for (d, &p) in dst.iter_mut().zip(&probs[i * v..(i + 1) * v]) {
                            *d = p * scale;
                        }
                        dst[t] -= scale;
                    }
                    self.accumulate(&mut grads, *logits, gl);
                }
                Op::KlDivergence {
                    logits,
                    rows,
                    probs,
                    coef,
                } => {
                    let tl = self.value(*logits);
                    let v = tl.cols();
                    let scale = g[0] / rows.len() as f64;
                    let mut gl = vec![0.0; tl.len()];
                    for (i, &r) in rows.iter().enumerate() {
                        for j in 0..v {
                            gl[r * v + j] = scale * probs[i * v + j] * coef[i * v + j];
                        }
                    }
                    self.accumulate(&mut grads, *logits, gl);
                }
            }
        }
        Ok(Gradients { slots })
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, g: Vec<f64>) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => {
                for (a, x) in acc.iter_mut().zip(&g) {
                    *a += x;
                }
            }
            slot @ None => *slot = Some(g),
        }
    }
}
