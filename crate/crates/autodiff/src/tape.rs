//! Wengert-list tape: every primitive appends a node holding its output and
//! enough context to run its vector-Jacobian product in reverse.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, TensorError};
use crate::linalg::gemm;
use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul { a: Var, b: Var, trans_b: bool },
    Add(Var, Var),
    AddRow { a: Var, bias: Var },
    Mul(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols { a: Var, start: usize },
    SliceRows { a: Var, start: usize },
    GatherRows { a: Var, indices: Vec<usize> },
    Softmax(Var),
    CrossEntropy { logits: Var, targets: Vec<usize>, weights: Vec<f64>, probs: Vec<f64> },
    Sum(Var),
    Dropout { a: Var, mask: Vec<f64> },
}

impl Op {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::MatMul { a, b, .. } | Op::Add(a, b) | Op::Mul(a, b) | Op::AddRow { a, bias: b } => vec![*a, *b],
            Op::Scale(a, _)
            | Op::Tanh(a)
            | Op::Sigmoid(a)
            | Op::Relu(a)
            | Op::SliceCols { a, .. }
            | Op::SliceRows { a, .. }
            | Op::GatherRows { a, .. }
            | Op::Softmax(a)
            | Op::Sum(a)
            | Op::Dropout { a, .. } => vec![*a],
            Op::CrossEntropy { logits, .. } => vec![*logits],
            Op::ConcatCols(parts) | Op::ConcatRows(parts) => parts.clone(),
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    grad: Option<Tensor>,
}

/// Records a forward computation for one training step.
///
/// Owned by a single session; inputs always precede the nodes that consume
/// them, so a reverse sweep over the node list is a valid topological order.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    bound: Vec<(ParamId, Var)>,
}

fn shape_err(op: &'static str, shapes: &[&Tensor]) -> TensorError {
    TensorError::ShapeMismatch { op, shapes: shapes.iter().map(|t| t.shape().to_vec()).collect() }
}

fn require_matrix(op: &'static str, t: &Tensor) -> Result<()> {
    if t.is_matrix() {
        Ok(())
    } else {
        Err(shape_err(op, &[t]))
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Trainable leaf.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, false)
    }

    fn push_leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad, grad: None });
        Var(self.nodes.len() - 1)
    }

    /// Binds a stored parameter as a trainable leaf. Binding the same
    /// parameter twice returns the same node, so tied uses share one gradient.
    pub fn bind(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&(_, v)) = self.bound.iter().find(|(p, _)| *p == id) {
            return v;
        }
        let v = self.leaf(store.value(id).clone());
        self.bound.push((id, v));
        v
    }

    pub fn bound_params(&self) -> &[(ParamId, Var)] {
        &self.bound
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient of the last backward pass; `None` for non-leaf nodes and
    /// before any backward pass.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    fn push(&mut self, value: Tensor, op: Op, name: &'static str) -> Result<Var> {
        if !value.all_finite() {
            return Err(TensorError::NonFinite(name));
        }
        let requires_grad = op.inputs().iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node { value, op, requires_grad, grad: None });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_impl(a, b, false)
    }

    /// `a · bᵀ`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_impl(a, b, true)
    }

    fn matmul_impl(&mut self, a: Var, b: Var, trans_b: bool) -> Result<Var> {
        let name = if trans_b { "matmul_nt" } else { "matmul" };
        let (ta, tb) = (self.value(a), self.value(b));
        require_matrix(name, ta)?;
        require_matrix(name, tb)?;
        let (m, k) = (ta.rows(), ta.cols());
        let (kb, n) = if trans_b { (tb.cols(), tb.rows()) } else { (tb.rows(), tb.cols()) };
        if k != kb {
            return Err(shape_err(name, &[ta, tb]));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, ta.data(), false, tb.data(), trans_b, &mut out, false);
        self.push(Tensor::matrix(m, n, out)?, Op::MatMul { a, b, trans_b }, name)
    }

    fn zip_same(&mut self, a: Var, b: Var, name: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err(name, &[ta, tb]));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(ta.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_same(a, b, "add", |x, y| x + y)?;
        self.push(out, Op::Add(a, b), "add")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_same(a, b, "mul", |x, y| x * y)?;
        self.push(out, Op::Mul(a, b), "mul")
    }

    /// Adds a `1×n` bias row to every row of an `m×n` matrix.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(bias));
        require_matrix("add_row", ta)?;
        if tb.shape() != [1, ta.cols()] {
            return Err(shape_err("add_row", &[ta, tb]));
        }
        let cols = ta.cols();
        let data = ta.data().iter().enumerate().map(|(i, &x)| x + tb.data()[i % cols]).collect();
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        self.push(out, Op::AddRow { a, bias }, "add_row")
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        if !factor.is_finite() {
            return Err(TensorError::BadAttr { op: "scale", msg: format!("non-finite factor {factor}") });
        }
        let ta = self.value(a);
        let out = Tensor::new(ta.shape().to_vec(), ta.data().iter().map(|x| x * factor).collect())?;
        self.push(out, Op::Scale(a, factor), "scale")
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64) -> Result<Tensor> {
        let ta = self.value(a);
        Tensor::new(ta.shape().to_vec(), ta.data().iter().map(|&x| f(x)).collect())
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let out = self.map(a, f64::tanh)?;
        self.push(out, Op::Tanh(a), "tanh")
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let out = self.map(a, sigmoid)?;
        self.push(out, Op::Sigmoid(a), "sigmoid")
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let out = self.map(a, |x| x.max(0.0))?;
        self.push(out, Op::Relu(a), "relu")
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(TensorError::BadAttr { op: "concat_cols", msg: "no inputs".into() });
        };
        let rows = self.value(first).rows();
        for &p in parts {
            let t = self.value(p);
            require_matrix("concat_cols", t)?;
            if t.rows() != rows {
                let shapes: Vec<&Tensor> = parts.iter().map(|&v| self.value(v)).collect();
                return Err(shape_err("concat_cols", &shapes));
            }
        }
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(r));
            }
        }
        let out = Tensor::matrix(rows, total, data)?;
        self.push(out, Op::ConcatCols(parts.to_vec()), "concat_cols")
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(TensorError::BadAttr { op: "concat_rows", msg: "no inputs".into() });
        };
        let cols = self.value(first).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let t = self.value(p);
            require_matrix("concat_rows", t)?;
            if t.cols() != cols {
                let shapes: Vec<&Tensor> = parts.iter().map(|&v| self.value(v)).collect();
                return Err(shape_err("concat_rows", &shapes));
            }
            rows += t.rows();
            data.extend_from_slice(t.data());
        }
        let out = Tensor::matrix(rows, cols, data)?;
        self.push(out, Op::ConcatRows(parts.to_vec()), "concat_rows")
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let ta = self.value(a);
        require_matrix("slice_cols", ta)?;
        if start >= end || end > ta.cols() {
            return Err(TensorError::BadAttr {
                op: "slice_cols",
                msg: format!("range {start}..{end} invalid for shape {:?}", ta.shape()),
            });
        }
        let mut data = Vec::with_capacity(ta.rows() * (end - start));
        for r in 0..ta.rows() {
            data.extend_from_slice(&ta.row_slice(r)[start..end]);
        }
        let out = Tensor::matrix(ta.rows(), end - start, data)?;
        self.push(out, Op::SliceCols { a, start }, "slice_cols")
    }

    /// Rows `start..end`.
    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let ta = self.value(a);
        require_matrix("slice_rows", ta)?;
        if start >= end || end > ta.rows() {
            return Err(TensorError::BadAttr {
                op: "slice_rows",
                msg: format!("range {start}..{end} invalid for shape {:?}", ta.shape()),
            });
        }
        let c = ta.cols();
        let out = Tensor::matrix(end - start, c, ta.data()[start * c..end * c].to_vec())?;
        self.push(out, Op::SliceRows { a, start }, "slice_rows")
    }

    /// Row gather; doubles as embedding lookup.
    pub fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        let ta = self.value(a);
        require_matrix("gather_rows", ta)?;
        if indices.is_empty() {
            return Err(TensorError::BadAttr { op: "gather_rows", msg: "no indices".into() });
        }
        let mut data = Vec::with_capacity(indices.len() * ta.cols());
        for &i in indices {
            if i >= ta.rows() {
                return Err(TensorError::IndexOutOfRange { op: "gather_rows", index: i, bound: ta.rows() });
            }
            data.extend_from_slice(ta.row_slice(i));
        }
        let out = Tensor::matrix(indices.len(), ta.cols(), data)?;
        self.push(out, Op::GatherRows { a, indices: indices.to_vec() }, "gather_rows")
    }

    /// Softmax over each row. Columns where `mask` is false get exactly zero
    /// probability; every row needs at least one unmasked column.
    pub fn softmax_rows(&mut self, a: Var, mask: Option<&[bool]>) -> Result<Var> {
        let ta = self.value(a);
        require_matrix("softmax_rows", ta)?;
        let cols = ta.cols();
        if let Some(m) = mask {
            if m.len() != cols {
                return Err(TensorError::BadAttr {
                    op: "softmax_rows",
                    msg: format!("mask length {} for {cols} columns", m.len()),
                });
            }
            if !m.iter().any(|&x| x) {
                return Err(TensorError::BadAttr { op: "softmax_rows", msg: "every column is masked".into() });
            }
        }
        let keep = |c: usize| mask.is_none_or(|m| m[c]);
        let mut data = vec![0.0; ta.len()];
        for r in 0..ta.rows() {
            let row = ta.row_slice(r);
            let max = (0..cols).filter(|&c| keep(c)).map(|c| row[c]).fold(f64::NEG_INFINITY, f64::max);
            let out = &mut data[r * cols..(r + 1) * cols];
            let mut sum = 0.0;
            for c in (0..cols).filter(|&c| keep(c)) {
                out[c] = (row[c] - max).exp();
                sum += out[c];
            }
            for v in out.iter_mut() {
                *v /= sum;
            }
        }
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        self.push(out, Op::Softmax(a), "softmax_rows")
    }

    /// `Σ_r weights[r] · −log softmax(logits[r])[targets[r]]`, as a `1×1`
    /// tensor. A zero weight removes a row from the loss entirely.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize], weights: &[f64]) -> Result<Var> {
        let tl = self.value(logits);
        require_matrix("cross_entropy", tl)?;
        let (rows, cols) = (tl.rows(), tl.cols());
        if targets.len() != rows || weights.len() != rows {
            return Err(TensorError::BadAttr {
                op: "cross_entropy",
                msg: format!("{rows} rows but {} targets and {} weights", targets.len(), weights.len()),
            });
        }
        let mut probs = vec![0.0; tl.len()];
        let mut loss = 0.0;
        for r in 0..rows {
            if targets[r] >= cols {
                return Err(TensorError::IndexOutOfRange { op: "cross_entropy", index: targets[r], bound: cols });
            }
            let row = tl.row_slice(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let p = &mut probs[r * cols..(r + 1) * cols];
            let mut sum = 0.0;
            for (pc, &x) in p.iter_mut().zip(row) {
                *pc = (x - max).exp();
                sum += *pc;
            }
            for pc in p.iter_mut() {
                *pc /= sum;
            }
            if weights[r] != 0.0 {
                loss += weights[r] * (sum.ln() + max - row[targets[r]]);
            }
        }
        let op = Op::CrossEntropy { logits, targets: targets.to_vec(), weights: weights.to_vec(), probs };
        self.push(Tensor::scalar(loss), op, "cross_entropy")
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let total = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(total), Op::Sum(a), "sum")
    }

    /// Inverted dropout: kept entries are scaled by `1/keep_prob`. Outside of
    /// training, or with `keep_prob == 1`, the input node is returned as is.
    pub fn dropout(&mut self, a: Var, keep_prob: f64, seed: u64, train: bool) -> Result<Var> {
        if !(keep_prob > 0.0 && keep_prob <= 1.0) {
            return Err(TensorError::BadAttr { op: "dropout", msg: format!("keep probability {keep_prob} not in (0, 1]") });
        }
        if !train || keep_prob == 1.0 {
            return Ok(a);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ta = self.value(a);
        let mask: Vec<f64> =
            (0..ta.len()).map(|_| if rng.random::<f64>() < keep_prob { 1.0 / keep_prob } else { 0.0 }).collect();
        let data = ta.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        self.push(out, Op::Dropout { a, mask }, "dropout")
    }

    /// Reverse sweep from a scalar loss. Afterwards every trainable leaf has
    /// a gradient; leaves the loss does not depend on get zeros.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let lt = self.value(loss);
        if lt.len() != 1 {
            return Err(TensorError::NonScalarLoss(lt.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        let mut leaf_grads = Vec::new();
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            if let Op::Leaf = node.op {
                leaf_grads.push((i, g));
            } else {
                self.propagate(i, &g, &mut grads);
            }
        }
        for node in &mut self.nodes {
            node.grad = None;
        }
        for (i, g) in leaf_grads {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(TensorError::NonFinite("backward"));
            }
            let shape = self.nodes[i].value.shape().to_vec();
            self.nodes[i].grad = Some(Tensor::new(shape, g)?);
        }
        for node in &mut self.nodes {
            if node.requires_grad && matches!(node.op, Op::Leaf) && node.grad.is_none() {
                node.grad = Some(Tensor::zeros(node.value.shape()));
            }
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        let out = &nodes[i].value;
        // Gradient buffer for an input, or None when it needs no gradient.
        let slot = |v: Var, grads: &mut [Option<Vec<f64>>]| -> bool {
            if !nodes[v.0].requires_grad {
                return false;
            }
            if grads[v.0].is_none() {
                grads[v.0] = Some(vec![0.0; nodes[v.0].value.len()]);
            }
            true
        };
        macro_rules! buf {
            ($v:expr) => {
                grads[$v.0].as_mut().unwrap()
            };
        }
        match &nodes[i].op {
            Op::Leaf => {}
            Op::MatMul { a, b, trans_b } => {
                let (ta, tb) = (&nodes[a.0].value, &nodes[b.0].value);
                let (m, k, n) = (ta.rows(), ta.cols(), out.cols());
                if slot(*a, grads) {
                    // dA = G · op(B)ᵀ
                    gemm(m, n, k, g, false, tb.data(), !trans_b, buf!(a), true);
                }
                if slot(*b, grads) {
                    if *trans_b {
                        // dB (n×k) = Gᵀ · A
                        gemm(n, m, k, g, true, ta.data(), false, buf!(b), true);
                    } else {
                        // dB (k×n) = Aᵀ · G
                        gemm(k, m, n, ta.data(), true, g, false, buf!(b), true);
                    }
                }
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    if slot(*v, grads) {
                        buf!(v).iter_mut().zip(g).for_each(|(d, x)| *d += x);
                    }
                }
            }
            Op::AddRow { a, bias } => {
                if slot(*a, grads) {
                    buf!(a).iter_mut().zip(g).for_each(|(d, x)| *d += x);
                }
                if slot(*bias, grads) {
                    let cols = out.cols();
                    let db = buf!(bias);
                    for (idx, x) in g.iter().enumerate() {
                        db[idx % cols] += x;
                    }
                }
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (&nodes[a.0].value, &nodes[b.0].value);
                if slot(*a, grads) {
                    let d = buf!(a);
                    for (idx, x) in g.iter().enumerate() {
                        d[idx] += x * tb.data()[idx];
                    }
                }
                if slot(*b, grads) {
                    let d = buf!(b);
                    for (idx, x) in g.iter().enumerate() {
                        d[idx] += x * ta.data()[idx];
                    }
                }
            }
            Op::Scale(a, f) => {
                if slot(*a, grads) {
                    buf!(a).iter_mut().zip(g).for_each(|(d, x)| *d += f * x);
                }
            }
            Op::Tanh(a) => {
                if slot(*a, grads) {
                    let d = buf!(a);
                    for (idx, (x, y)) in g.iter().zip(out.data()).enumerate() {
                        d[idx] += x * (1.0 - y * y);
                    }
                }
            }
            Op::Sigmoid(a) => {
                if slot(*a, grads) {
                    let d = buf!(a);
                    for (idx, (x, y)) in g.iter().zip(out.data()).enumerate() {
                        d[idx] += x * y * (1.0 - y);
                    }
                }
            }
            Op::Relu(a) => {
                let input = &nodes[a.0].value;
                if slot(*a, grads) {
                    let d = buf!(a);
                    for (idx, (x, z)) in g.iter().zip(input.data()).enumerate() {
                        if *z > 0.0 {
                            d[idx] += x;
                        }
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let total = out.cols();
                let mut offset = 0;
                for p in parts {
                    let c = nodes[p.0].value.cols();
                    if slot(*p, grads) {
                        let d = buf!(p);
                        for r in 0..out.rows() {
                            for j in 0..c {
                                d[r * c + j] += g[r * total + offset + j];
                            }
                        }
                    }
                    offset += c;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for p in parts {
                    let len = nodes[p.0].value.len();
                    if slot(*p, grads) {
                        buf!(p).iter_mut().zip(&g[offset..offset + len]).for_each(|(d, x)| *d += x);
                    }
                    offset += len;
                }
            }
            Op::SliceCols { a, start } => {
                if slot(*a, grads) {
                    let src_cols = nodes[a.0].value.cols();
                    let c = out.cols();
                    let d = buf!(a);
                    for r in 0..out.rows() {
                        for j in 0..c {
                            d[r * src_cols + start + j] += g[r * c + j];
                        }
                    }
                }
            }
            Op::SliceRows { a, start } => {
                if slot(*a, grads) {
                    let off = start * out.cols();
                    buf!(a)[off..off + g.len()].iter_mut().zip(g).for_each(|(d, x)| *d += x);
                }
            }
            Op::GatherRows { a, indices } => {
                if slot(*a, grads) {
                    let c = out.cols();
                    let d = buf!(a);
                    for (r, &src) in indices.iter().enumerate() {
                        for j in 0..c {
                            d[src * c + j] += g[r * c + j];
                        }
                    }
                }
            }
            Op::Softmax(a) => {
                if slot(*a, grads) {
                    let c = out.cols();
                    let d = buf!(a);
                    for r in 0..out.rows() {
                        let y = out.row_slice(r);
                        let gr = &g[r * c..(r + 1) * c];
                        let dot: f64 = y.iter().zip(gr).map(|(p, q)| p * q).sum();
                        for j in 0..c {
                            d[r * c + j] += y[j] * (gr[j] - dot);
                        }
                    }
                }
            }
            Op::CrossEntropy { logits, targets, weights, probs } => {
                if slot(*logits, grads) {
                    let c = nodes[logits.0].value.cols();
                    let d = buf!(logits);
                    for (r, (&t, &w)) in targets.iter().zip(weights).enumerate() {
                        if w == 0.0 {
                            continue;
                        }
                        let scale = g[0] * w;
                        for j in 0..c {
                            let onehot = if j == t { 1.0 } else { 0.0 };
                            d[r * c + j] += scale * (probs[r * c + j] - onehot);
                        }
                    }
                }
            }
            Op::Sum(a) => {
                if slot(*a, grads) {
                    buf!(a).iter_mut().for_each(|d| *d += g[0]);
                }
            }
            Op::Dropout { a, mask } => {
                if slot(*a, grads) {
                    let d = buf!(a);
                    for (idx, x) in g.iter().enumerate() {
                        d[idx] += x * mask[idx];
                    }
                }
            }
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
