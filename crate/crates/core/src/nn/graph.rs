//! Tape-based reverse-mode differentiation over dense matrices.
//!
//! A [`Graph`] records every value produced during a forward pass. Leaves are
//! copied in from [`Tensor`]s; calling [`Graph::backward`] on a scalar node walks
//! the tape in reverse and returns the gradient of that scalar with respect to
//! every leaf marked as requiring gradients. The tape is consumed by `backward`.

use super::tensor::Tensor;
use super::Activation;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    /// `x · wᵀ` with x `[b×i]`, w `[o×i]`.
    MatMulT(Var, Var),
    /// Adds a length-`o` bias to every row.
    AddRow(Var, Var),
    Act(Activation, Var),
    ConcatCols(Vec<Var>),
    Mul(Var, Var),
    Add(Var, Var),
    Scale(Var, f64),
    Sum(Var),
    Mean(Var),
    /// Mean softmax cross-entropy; caches the softmax probabilities.
    CrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Vec<f64>,
    },
    /// Mean squared error against a constant target.
    Mse {
        pred: Var,
        target: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    rows: usize,
    cols: usize,
    value: Vec<f64>,
    op: Op,
    tracked: bool,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Gradients produced by [`Graph::backward`], indexed by leaf.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn wrt(&self, var: Var) -> Option<&[f64]> {
        self.grads.get(var.0).and_then(|g| g.as_deref())
    }

    pub fn take(&mut self, var: Var) -> Option<Vec<f64>> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<f64>, op: Op, tracked: bool) -> Var {
        debug_assert_eq!(rows * cols, value.len());
        self.nodes.push(Node {
            rows,
            cols,
            value,
            op,
            tracked,
        });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node {
        &self.nodes[v.0]
    }

    /// Records a tensor as a leaf. It participates in differentiation iff the
    /// tensor's `requires_grad` flag is set.
    pub fn leaf(&mut self, t: &Tensor) -> Var {
        self.leaf_tracked(t, t.requires_grad())
    }

    /// Records a tensor as a leaf, overriding its `requires_grad` flag.
    pub fn leaf_tracked(&mut self, t: &Tensor, tracked: bool) -> Var {
        self.push(t.rows(), t.cols(), t.values().to_vec(), Op::Leaf, tracked)
    }

    /// Records a constant leaf that never receives gradients.
    pub fn constant(&mut self, rows: usize, cols: usize, values: Vec<f64>) -> Result<Var> {
        if rows * cols != values.len() {
            return Err(Error::shape("Graph::constant", rows * cols, values.len()));
        }
        Ok(self.push(rows, cols, values, Op::Leaf, false))
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.node(v).value
    }

    pub fn dims(&self, v: Var) -> (usize, usize) {
        let n = self.node(v);
        (n.rows, n.cols)
    }

    /// Copies a node out as a tensor; 1×1 nodes become shape `[1]`.
    pub fn to_tensor(&self, v: Var) -> Tensor {
        let n = self.node(v);
        if n.rows == 1 && n.cols == 1 {
            Tensor::from_raw(vec![1], n.value.clone())
        } else {
            self.to_tensor_matrix(v)
        }
    }

    pub fn to_tensor_matrix(&self, v: Var) -> Tensor {
        let n = self.node(v);
        Tensor::from_raw(vec![n.rows, n.cols], n.value.clone())
    }

    pub fn matmul_t(&mut self, x: Var, w: Var) -> Result<Var> {
        let (b, i) = self.dims(x);
        let (o, wi) = self.dims(w);
        if i != wi {
            return Err(Error::shape(
                "matmul",
                format!("input dim {wi}"),
                format!("input dim {i}"),
            ));
        }
        let xv = &self.node(x).value;
        let wv = &self.node(w).value;
        let mut out = vec![0.0; b * o];
        for r in 0..b {
            let xr = &xv[r * i..(r + 1) * i];
            for c in 0..o {
                let wr = &wv[c * i..(c + 1) * i];
                out[r * o + c] = xr.iter().zip(wr).map(|(a, b)| a * b).sum();
            }
        }
        let tracked = self.node(x).tracked || self.node(w).tracked;
        Ok(self.push(b, o, out, Op::MatMulT(x, w), tracked))
    }

    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (b, o) = self.dims(x);
        let (br, bc) = self.dims(bias);
        if br * bc != o {
            return Err(Error::shape("add_row", format!("bias of length {o}"), br * bc));
        }
        let bv = &self.node(bias).value;
        let mut out = self.node(x).value.clone();
        for r in 0..b {
            for (v, bb) in out[r * o..(r + 1) * o].iter_mut().zip(bv) {
                *v += bb;
            }
        }
        let tracked = self.node(x).tracked || self.node(bias).tracked;
        Ok(self.push(b, o, out, Op::AddRow(x, bias), tracked))
    }

    pub fn activation(&mut self, act: Activation, x: Var) -> Var {
        if act == Activation::Identity {
            return x;
        }
        let n = self.node(x);
        let out = n.value.iter().map(|&v| act.apply(v)).collect();
        let (r, c, tracked) = (n.rows, n.cols, n.tracked);
        self.push(r, c, out, Op::Act(act, x), tracked)
    }

    /// Concatenates matrices with equal row counts along the column axis.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Empty("concat_cols needs at least one input".into()))?;
        let rows = self.dims(first).0;
        let mut cols = 0;
        for &p in parts {
            let (r, c) = self.dims(p);
            if r != rows {
                return Err(Error::shape("concat_cols", format!("{rows} rows"), format!("{r} rows")));
            }
            cols += c;
        }
        let mut out = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                let n = self.node(p);
                out.extend_from_slice(&n.value[r * n.cols..(r + 1) * n.cols]);
            }
        }
        let tracked = parts.iter().any(|&p| self.node(p).tracked);
        Ok(self.push(rows, cols, out, Op::ConcatCols(parts.to_vec()), tracked))
    }

    fn same_dims(&self, op: &'static str, a: Var, b: Var) -> Result<(usize, usize)> {
        let (da, db) = (self.dims(a), self.dims(b));
        if da != db {
            return Err(Error::shape(op, format!("{da:?}"), format!("{db:?}")));
        }
        Ok(da)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, c) = self.same_dims("mul", a, b)?;
        let out = self
            .node(a)
            .value
            .iter()
            .zip(&self.node(b).value)
            .map(|(x, y)| x * y)
            .collect();
        let tracked = self.node(a).tracked || self.node(b).tracked;
        Ok(self.push(r, c, out, Op::Mul(a, b), tracked))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, c) = self.same_dims("add", a, b)?;
        let out = self
            .node(a)
            .value
            .iter()
            .zip(&self.node(b).value)
            .map(|(x, y)| x + y)
            .collect();
        let tracked = self.node(a).tracked || self.node(b).tracked;
        Ok(self.push(r, c, out, Op::Add(a, b), tracked))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let n = self.node(x);
        let out = n.value.iter().map(|v| v * factor).collect();
        let (r, c, tracked) = (n.rows, n.cols, n.tracked);
        self.push(r, c, out, Op::Scale(x, factor), tracked)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let n = self.node(x);
        let s = n.value.iter().sum();
        let tracked = n.tracked;
        self.push(1, 1, vec![s], Op::Sum(x), tracked)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let n = self.node(x);
        let s = n.value.iter().sum::<f64>() / n.value.len() as f64;
        let tracked = n.tracked;
        self.push(1, 1, vec![s], Op::Mean(x), tracked)
    }

    /// Mean over the batch of `-log softmax(logits)[label]`.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let (b, k) = self.dims(logits);
        if labels.len() != b {
            return Err(Error::shape("cross_entropy", format!("{b} labels"), labels.len()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::LabelOutOfRange { label: bad, classes: k });
        }
        let lv = &self.node(logits).value;
        let mut probs = vec![0.0; b * k];
        let mut loss = 0.0;
        for r in 0..b {
            let row = &lv[r * k..(r + 1) * k];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|v| (v - max).exp()).sum();
            let log_z = max + z.ln();
            for c in 0..k {
                probs[r * k + c] = (row[c] - log_z).exp();
            }
            loss += log_z - row[labels[r]];
        }
        loss /= b as f64;
        let tracked = self.node(logits).tracked;
        Ok(self.push(
            1,
            1,
            vec![loss],
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            tracked,
        ))
    }

    /// Mean squared error between `pred` and a constant target of equal size.
    pub fn mse(&mut self, pred: Var, target: &[f64]) -> Result<Var> {
        let n = self.node(pred);
        if n.value.len() != target.len() {
            return Err(Error::shape("mse", n.value.len(), target.len()));
        }
        let loss = n.value.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / target.len() as f64;
        let tracked = n.tracked;
        Ok(self.push(
            1,
            1,
            vec![loss],
            Op::Mse {
                pred,
                target: target.to_vec(),
            },
            tracked,
        ))
    }

    /// Back-propagates from the scalar `loss`. Returns gradients for every
    /// tracked leaf; untracked leaves and intermediates have no entry.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(Error::GraphConsumed);
        }
        let numel = self.node(loss).value.len();
        if numel != 1 {
            return Err(Error::NonScalarLoss(numel));
        }
        self.consumed = true;

        let n = self.nodes.len();
        let mut adj: Vec<Option<Vec<f64>>> = (0..n).map(|_| None).collect();
        adj[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            if !self.nodes[idx].tracked {
                continue;
            }
            if matches!(self.nodes[idx].op, Op::Leaf) {
                adj[idx] = Some(g);
                continue;
            }
            self.propagate(idx, &g, &mut adj);
        }

        let grads = self
            .nodes
            .iter()
            .zip(adj)
            .map(|(node, g)| match node.op {
                Op::Leaf if node.tracked => Some(g.unwrap_or_else(|| vec![0.0; node.value.len()])),
                _ => None,
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn accumulate(&self, adj: &mut [Option<Vec<f64>>], v: Var, f: impl FnOnce(&mut [f64])) {
        if !self.node(v).tracked {
            return;
        }
        let buf = adj[v.0].get_or_insert_with(|| vec![0.0; self.node(v).value.len()]);
        f(buf);
    }

    fn propagate(&self, idx: usize, g: &[f64], adj: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => {}
            Op::MatMulT(x, w) => {
                let (b, i) = self.dims(*x);
                let o = node.cols;
                let xv = &self.node(*x).value;
                let wv = &self.node(*w).value;
                self.accumulate(adj, *x, |gx| {
                    for r in 0..b {
                        for c in 0..o {
                            let gr = g[r * o + c];
                            if gr == 0.0 {
                                continue;
                            }
                            let wr = &wv[c * i..(c + 1) * i];
                            for (dst, wj) in gx[r * i..(r + 1) * i].iter_mut().zip(wr) {
                                *dst += gr * wj;
                            }
                        }
                    }
                });
                self.accumulate(adj, *w, |gw| {
                    for r in 0..b {
                        let xr = &xv[r * i..(r + 1) * i];
                        for c in 0..o {
                            let gr = g[r * o + c];
                            if gr == 0.0 {
                                continue;
                            }
                            for (dst, xj) in gw[c * i..(c + 1) * i].iter_mut().zip(xr) {
                                *dst += gr * xj;
                            }
                        }
                    }
                });
            }
            Op::AddRow(x, bias) => {
                let (b, o) = (node.rows, node.cols);
                self.accumulate(adj, *x, |gx| {
                    for (d, s) in gx.iter_mut().zip(g) {
                        *d += s;
                    }
                });
                self.accumulate(adj, *bias, |gb| {
                    for r in 0..b {
                        for (d, s) in gb.iter_mut().zip(&g[r * o..(r + 1) * o]) {
                            *d += s;
                        }
                    }
                });
            }
            Op::Act(act, x) => {
                let out = &node.value;
                let xin = &self.node(*x).value;
                self.accumulate(adj, *x, |gx| {
                    for k in 0..gx.len() {
                        gx[k] += g[k] * act.derivative(xin[k], out[k]);
                    }
                });
            }
            Op::ConcatCols(parts) => {
                let rows = node.rows;
                let total = node.cols;
                let mut offset = 0;
                for &p in parts {
                    let c = self.node(p).cols;
                    self.accumulate(adj, p, |gp| {
                        for r in 0..rows {
                            for j in 0..c {
                                gp[r * c + j] += g[r * total + offset + j];
                            }
                        }
                    });
                    offset += c;
                }
            }
            Op::Mul(a, b) => {
                let av = &self.node(*a).value;
                let bv = &self.node(*b).value;
                self.accumulate(adj, *a, |ga| {
                    for k in 0..ga.len() {
                        ga[k] += g[k] * bv[k];
                    }
                });
                self.accumulate(adj, *b, |gb| {
                    for k in 0..gb.len() {
                        gb[k] += g[k] * av[k];
                    }
                });
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    self.accumulate(adj, v, |gv| {
                        for (d, s) in gv.iter_mut().zip(g) {
                            *d += s;
                        }
                    });
                }
            }
            Op::Scale(x, factor) => {
                self.accumulate(adj, *x, |gx| {
                    for (d, s) in gx.iter_mut().zip(g) {
                        *d += s * factor;
                    }
                });
            }
            Op::Sum(x) => {
                self.accumulate(adj, *x, |gx| gx.iter_mut().for_each(|d| *d += g[0]));
            }
            Op::Mean(x) => {
                let scale = g[0] / self.node(*x).value.len() as f64;
                self.accumulate(adj, *x, |gx| gx.iter_mut().for_each(|d| *d += scale));
            }
            Op::CrossEntropy { logits, labels, probs } => {
                let (b, k) = self.dims(*logits);
                let scale = g[0] / b as f64;
                self.accumulate(adj, *logits, |gl| {
                    for r in 0..b {
                        for c in 0..k {
                            let onehot = if labels[r] == c { 1.0 } else { 0.0 };
                            gl[r * k + c] += scale * (probs[r * k + c] - onehot);
                        }
                    }
                });
            }
            Op::Mse { pred, target } => {
                let pv = &self.node(*pred).value;
                let scale = 2.0 * g[0] / target.len() as f64;
                self.accumulate(adj, *pred, |gp| {
                    for k in 0..gp.len() {
                        gp[k] += scale * (pv[k] - target[k]);
                    }
                });
            }
        }
    }
}
