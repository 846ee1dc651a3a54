//! Reverse-mode automatic differentiation over dense tensors.
//!
//! Every primitive appends one node to the [`Tape`]. Nodes are stored in
//! creation order, which is a topological order of the computation, so
//! [`Tape::backward`] only needs a single reverse sweep.

use super::tensor::{matmul_raw, Tensor};
use super::NumericsError;

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    AddRow(Var, Var),
    ConcatCols(Vec<Var>),
    Concat(Vec<Var>),
    Lookup { table: Var, ids: Vec<usize> },
    Relu(Var),
    MaskedSoftmax(Var),
    LogSoftmax(Var),
    Mean(Vec<Var>),
    Dot(Var, Var),
    Log(Var),
    Scale(Var, f64),
    Sum(Var),
    WeightedSum(Var, Tensor),
    CrossEntropy { logits: Var, targets: Vec<usize> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Recording of a forward computation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every node that requires them.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    /// Gradient for `var`, or zeros of `shape` when nothing flowed into it.
    pub fn get_or_zeros(&self, var: Var, shape: &[usize]) -> Tensor {
        self.get(var).cloned().unwrap_or_else(|| Tensor::zeros(shape))
    }

    pub fn take(&mut self, var: Var) -> Option<Tensor> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }
}

fn shape_err(op: &'static str, lhs: &Tensor, rhs: &Tensor) -> NumericsError {
    NumericsError::ShapeMismatch {
        op,
        lhs: lhs.shape().to_vec(),
        rhs: rhs.shape().to_vec(),
    }
}

fn is_matrix(t: &Tensor) -> bool {
    t.shape().len() == 2
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a trainable input.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    /// Records an input that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    fn push(&mut self, op: &'static str, value: Tensor, node_op: Op, parents: &[Var]) -> Result<Var, NumericsError> {
        if !value.is_finite() {
            return Err(NumericsError::NonFiniteValue { op });
        }
        let requires_grad = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        self.nodes.push(Node {
            value,
            op: node_op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Matrix product of an `m×k` and a `k×n` matrix.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let (av, bv) = (self.value(a), self.value(b));
        if !is_matrix(av) || !is_matrix(bv) || av.cols() != bv.rows() {
            return Err(shape_err("matmul", av, bv));
        }
        let (m, k, n) = (av.rows(), av.cols(), bv.cols());
        let out = Tensor::new(vec![m, n], matmul_raw(av.data(), bv.data(), m, k, n))?;
        self.push("matmul", out, Op::MatMul(a, b), &[a, b])
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, NumericsError> {
        let av = self.value(a);
        if !is_matrix(av) {
            return Err(shape_err("transpose", av, av));
        }
        let out = av.transposed();
        self.push("transpose", out, Op::Transpose(a), &[a])
    }

    /// Elementwise sum of two same-shape tensors.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(shape_err("add", av, bv));
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x + y).collect();
        let out = Tensor::new(av.shape().to_vec(), data)?;
        self.push("add", out, Op::Add(a, b), &[a, b])
    }

    /// Adds a length-`n` vector to every row of an `m×n` matrix.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var, NumericsError> {
        let (av, bv) = (self.value(a), self.value(bias));
        if !is_matrix(av) || bv.len() != av.cols() {
            return Err(shape_err("add_row", av, bv));
        }
        let cols = av.cols();
        let data = av
            .data()
            .iter()
            .enumerate()
            .map(|(idx, x)| x + bv.data()[idx % cols])
            .collect();
        let out = Tensor::new(av.shape().to_vec(), data)?;
        self.push("add_row", out, Op::AddRow(a, bias), &[a, bias])
    }

    /// Column-wise concatenation of matrices that share a row count.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NumericsError> {
        let first = parts.first().ok_or(NumericsError::EmptyInput { op: "concat_cols" })?;
        let rows = self.value(*first).rows();
        for p in parts {
            let pv = self.value(*p);
            if !is_matrix(pv) || pv.rows() != rows {
                return Err(shape_err("concat_cols", self.value(*first), pv));
            }
        }
        let total: usize = parts.iter().map(|p| self.value(*p).cols()).sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for p in parts {
                data.extend_from_slice(self.value(*p).row(r));
            }
        }
        let out = Tensor::new(vec![rows, total], data)?;
        self.push("concat_cols", out, Op::ConcatCols(parts.to_vec()), parts)
    }

    /// Concatenation of flattened tensors into one vector.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, NumericsError> {
        if parts.is_empty() {
            return Err(NumericsError::EmptyInput { op: "concat" });
        }
        let mut data = Vec::new();
        for p in parts {
            data.extend_from_slice(self.value(*p).data());
        }
        let out = Tensor::vector(data);
        self.push("concat", out, Op::Concat(parts.to_vec()), parts)
    }

    /// Gathers rows of `table` by id into an `ids.len() × cols` matrix.
    pub fn embedding_lookup(&mut self, table: Var, ids: &[usize]) -> Result<Var, NumericsError> {
        let tv = self.value(table);
        if !is_matrix(tv) {
            return Err(shape_err("embedding_lookup", tv, tv));
        }
        let cols = tv.cols();
        let mut data = Vec::with_capacity(ids.len() * cols);
        for &id in ids {
            if id >= tv.rows() {
                return Err(NumericsError::IndexOutOfRange {
                    op: "embedding_lookup",
                    index: id,
                    len: tv.rows(),
                });
            }
            data.extend_from_slice(tv.row(id));
        }
        let out = Tensor::new(vec![ids.len(), cols], data)?;
        self.push(
            "embedding_lookup",
            out,
            Op::Lookup {
                table,
                ids: ids.to_vec(),
            },
            &[table],
        )
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, NumericsError> {
        let av = self.value(a);
        let data = av.data().iter().map(|x| x.max(0.0)).collect();
        let out = Tensor::new(av.shape().to_vec(), data)?;
        self.push("relu", out, Op::Relu(a), &[a])
    }

    /// Row-wise softmax restricted to the active entries of `mask`.
    ///
    /// Masked positions are exactly zero in the output. Every row must
    /// have at least one active entry.
    pub fn softmax_over_masked_set(&mut self, a: Var, mask: &[bool]) -> Result<Var, NumericsError> {
        let av = self.value(a);
        if mask.len() != av.len() {
            return Err(NumericsError::ShapeMismatch {
                op: "masked_softmax",
                lhs: av.shape().to_vec(),
                rhs: vec![mask.len()],
            });
        }
        let cols = av.cols();
        let mut out = vec![0.0; av.len()];
        for r in 0..av.rows() {
            let row = av.row(r);
            let m = &mask[r * cols..(r + 1) * cols];
            let max = row
                .iter()
                .zip(m)
                .filter(|(_, &keep)| keep)
                .map(|(v, _)| *v)
                .fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                return Err(NumericsError::EmptyMask { row: r });
            }
            let o = &mut out[r * cols..(r + 1) * cols];
            let mut total = 0.0;
            for j in 0..cols {
                if m[j] {
                    o[j] = (row[j] - max).exp();
                    total += o[j];
                }
            }
            for v in o.iter_mut() {
                *v /= total;
            }
        }
        let out = Tensor::new(av.shape().to_vec(), out)?;
        self.push("masked_softmax", out, Op::MaskedSoftmax(a), &[a])
    }

    /// Row-wise `log(softmax(x))`, computed without forming the softmax.
    pub fn log_softmax_rows(&mut self, a: Var) -> Result<Var, NumericsError> {
        let av = self.value(a);
        let cols = av.cols();
        if cols == 0 {
            return Err(NumericsError::EmptyInput { op: "log_softmax" });
        }
        let mut out = vec![0.0; av.len()];
        for r in 0..av.rows() {
            let row = av.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            for (o, v) in out[r * cols..(r + 1) * cols].iter_mut().zip(row) {
                *o = v - lse;
            }
        }
        let out = Tensor::new(av.shape().to_vec(), out)?;
        self.push("log_softmax", out, Op::LogSoftmax(a), &[a])
    }

    /// Elementwise mean of same-shape tensors.
    pub fn mean_over_list(&mut self, parts: &[Var]) -> Result<Var, NumericsError> {
        let first = parts.first().ok_or(NumericsError::EmptyInput { op: "mean_over_list" })?;
        let shape = self.value(*first).shape().to_vec();
        let mut data = vec![0.0; self.value(*first).len()];
        for p in parts {
            let pv = self.value(*p);
            if pv.shape() != shape.as_slice() {
                return Err(shape_err("mean_over_list", self.value(*first), pv));
            }
            for (d, v) in data.iter_mut().zip(pv.data()) {
                *d += v;
            }
        }
        let count = parts.len() as f64;
        data.iter_mut().for_each(|d| *d /= count);
        let out = Tensor::new(shape, data)?;
        self.push("mean_over_list", out, Op::Mean(parts.to_vec()), parts)
    }

    /// Inner product of two equal-length tensors, as a scalar.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.len() != bv.len() {
            return Err(shape_err("dot", av, bv));
        }
        let v = av.data().iter().zip(bv.data()).map(|(x, y)| x * y).sum();
        self.push("dot", Tensor::scalar(v), Op::Dot(a, b), &[a, b])
    }

    pub fn log(&mut self, a: Var) -> Result<Var, NumericsError> {
        let av = self.value(a);
        if av.data().iter().any(|v| *v <= 0.0) {
            return Err(NumericsError::NonFiniteValue { op: "log" });
        }
        let data = av.data().iter().map(|v| v.ln()).collect();
        let out = Tensor::new(av.shape().to_vec(), data)?;
        self.push("log", out, Op::Log(a), &[a])
    }

    pub fn scalar_mul(&mut self, a: Var, factor: f64) -> Result<Var, NumericsError> {
        let av = self.value(a);
        let data = av.data().iter().map(|v| v * factor).collect();
        let out = Tensor::new(av.shape().to_vec(), data)?;
        self.push("scalar_mul", out, Op::Scale(a, factor), &[a])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var, NumericsError> {
        let v = self.value(a).data().iter().sum();
        self.push("sum", Tensor::scalar(v), Op::Sum(a), &[a])
    }

    /// `Σ w ⊙ a` for a constant weight tensor `w` of the same length.
    pub fn weighted_sum(&mut self, a: Var, weights: Tensor) -> Result<Var, NumericsError> {
        let av = self.value(a);
        if av.len() != weights.len() {
            return Err(shape_err("weighted_sum", av, &weights));
        }
        let v = av.data().iter().zip(weights.data()).map(|(x, w)| x * w).sum();
        self.push("weighted_sum", Tensor::scalar(v), Op::WeightedSum(a, weights), &[a])
    }

    /// Mean over rows of `-log softmax(logits[r])[targets[r]]`.
    pub fn cross_entropy_with_logits(&mut self, logits: Var, targets: &[usize]) -> Result<Var, NumericsError> {
        let lv = self.value(logits);
        if !is_matrix(lv) || lv.rows() != targets.len() {
            return Err(NumericsError::ShapeMismatch {
                op: "cross_entropy",
                lhs: lv.shape().to_vec(),
                rhs: vec![targets.len()],
            });
        }
        if targets.is_empty() {
            return Err(NumericsError::EmptyInput { op: "cross_entropy" });
        }
        let mut total = 0.0;
        for (r, &t) in targets.iter().enumerate() {
            if t >= lv.cols() {
                return Err(NumericsError::IndexOutOfRange {
                    op: "cross_entropy",
                    index: t,
                    len: lv.cols(),
                });
            }
            let row = lv.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse - row[t];
        }
        let v = total / targets.len() as f64;
        self.push(
            "cross_entropy",
            Tensor::scalar(v),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
            },
            &[logits],
        )
    }

    /// Reverse sweep from a scalar output.
    pub fn backward(&self, output: Var) -> Result<Gradients, NumericsError> {
        let out = self.value(output);
        if out.len() != 1 {
            return Err(NumericsError::NotScalar {
                shape: out.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; output.0 + 1];
        grads[output.0] = Some(Tensor::filled(out.shape(), 1.0));

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], var: Var, contrib: Vec<f64>) {
        if !self.nodes[var.0].requires_grad {
            return;
        }
        match &mut grads[var.0] {
            Some(g) => g.add_assign(&contrib),
            slot @ None => {
                let shape = self.nodes[var.0].value.shape().to_vec();
                *slot = Some(Tensor::new(shape, contrib).expect("gradient matches value shape"));
            }
        }
    }

    fn wants(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let gd = g.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k, n) = (av.rows(), av.cols(), bv.cols());
                if self.wants(*a) {
                    // dA = dC · Bᵀ
                    let bt = bv.transposed();
                    self.accumulate(grads, *a, matmul_raw(gd, bt.data(), m, n, k));
                }
                if self.wants(*b) {
                    // dB = Aᵀ · dC
                    let at = av.transposed();
                    self.accumulate(grads, *b, matmul_raw(at.data(), gd, k, m, n));
                }
            }
            Op::Transpose(a) => {
                self.accumulate(grads, *a, g.transposed().into_data());
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, gd.to_vec());
                self.accumulate(grads, *b, gd.to_vec());
            }
            Op::AddRow(a, bias) => {
                self.accumulate(grads, *a, gd.to_vec());
                if self.wants(*bias) {
                    let cols = g.cols();
                    let mut db = vec![0.0; cols];
                    for (idx, v) in gd.iter().enumerate() {
                        db[idx % cols] += v;
                    }
                    self.accumulate(grads, *bias, db);
                }
            }
            Op::ConcatCols(parts) => {
                let (rows, total) = (g.rows(), g.cols());
                let mut offset = 0;
                for p in parts {
                    let cols = self.value(*p).cols();
                    if self.wants(*p) {
                        let mut piece = Vec::with_capacity(rows * cols);
                        for r in 0..rows {
                            piece.extend_from_slice(&gd[r * total + offset..r * total + offset + cols]);
                        }
                        self.accumulate(grads, *p, piece);
                    }
                    offset += cols;
                }
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for p in parts {
                    let len = self.value(*p).len();
                    self.accumulate(grads, *p, gd[offset..offset + len].to_vec());
                    offset += len;
                }
            }
            Op::Lookup { table, ids } => {
                let tv = self.value(*table);
                let cols = tv.cols();
                let mut dt = vec![0.0; tv.len()];
                for (r, &id) in ids.iter().enumerate() {
                    for c in 0..cols {
                        dt[id * cols + c] += gd[r * cols + c];
                    }
                }
                self.accumulate(grads, *table, dt);
            }
            Op::Relu(a) => {
                let av = self.value(*a);
                let d = av
                    .data()
                    .iter()
                    .zip(gd)
                    .map(|(x, g)| if *x > 0.0 { *g } else { 0.0 })
                    .collect();
                self.accumulate(grads, *a, d);
            }
            Op::MaskedSoftmax(a) => {
                // Masked entries have y = 0, so their gradient vanishes.
                let y = &node.value;
                let cols = y.cols();
                let mut d = vec![0.0; y.len()];
                for r in 0..y.rows() {
                    let yr = y.row(r);
                    let gr = &gd[r * cols..(r + 1) * cols];
                    let inner: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for j in 0..cols {
                        d[r * cols + j] = yr[j] * (gr[j] - inner);
                    }
                }
                self.accumulate(grads, *a, d);
            }
            Op::LogSoftmax(a) => {
                let y = &node.value;
                let cols = y.cols();
                let mut d = vec![0.0; y.len()];
                for r in 0..y.rows() {
                    let yr = y.row(r);
                    let gr = &gd[r * cols..(r + 1) * cols];
                    let total: f64 = gr.iter().sum();
                    for j in 0..cols {
                        d[r * cols + j] = gr[j] - yr[j].exp() * total;
                    }
                }
                self.accumulate(grads, *a, d);
            }
            Op::Mean(parts) => {
                let scale = 1.0 / parts.len() as f64;
                for p in parts {
                    self.accumulate(grads, *p, gd.iter().map(|v| v * scale).collect());
                }
            }
            Op::Dot(a, b) => {
                let s = gd[0];
                let (av, bv) = (self.value(*a), self.value(*b));
                self.accumulate(grads, *a, bv.data().iter().map(|v| v * s).collect());
                self.accumulate(grads, *b, av.data().iter().map(|v| v * s).collect());
            }
            Op::Log(a) => {
                let av = self.value(*a);
                let d = av.data().iter().zip(gd).map(|(x, g)| g / x).collect();
                self.accumulate(grads, *a, d);
            }
            Op::Scale(a, factor) => {
                self.accumulate(grads, *a, gd.iter().map(|v| v * factor).collect());
            }
            Op::Sum(a) => {
                let len = self.value(*a).len();
                self.accumulate(grads, *a, vec![gd[0]; len]);
            }
            Op::WeightedSum(a, w) => {
                self.accumulate(grads, *a, w.data().iter().map(|v| v * gd[0]).collect());
            }
            Op::CrossEntropy { logits, targets } => {
                let lv = self.value(*logits);
                let cols = lv.cols();
                let scale = gd[0] / targets.len() as f64;
                let mut d = vec![0.0; lv.len()];
                for (r, &t) in targets.iter().enumerate() {
                    let row = lv.row(r);
                    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
                    let total: f64 = exps.iter().sum();
                    for j in 0..cols {
                        let onehot = if j == t { 1.0 } else { 0.0 };
                        d[r * cols + j] = scale * (exps[j] / total - onehot);
                    }
                }
                self.accumulate(grads, *logits, d);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masked_softmax_of_equal_logits_is_uniform() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::matrix(1, 3, vec![0.0, 0.0, 5.0]).unwrap());
        let y = tape.softmax_over_masked_set(x, &[true, true, false]).unwrap();
        assert_eq!(tape.value(y).data(), &[0.5, 0.5, 0.0]);
    }

    #[test]
    fn masked_softmax_rejects_empty_row() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::matrix(2, 2, vec![0.0; 4]).unwrap());
        let err = tape.softmax_over_masked_set(x, &[true, false, false, false]).unwrap_err();
        assert!(matches!(err, NumericsError::EmptyMask { row: 1 }));
    }

    #[test]
    fn relu_values_and_gradient() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(vec![-1.0, 2.0]));
        let y = tape.relu(x).unwrap();
        assert_eq!(tape.value(y).data(), &[0.0, 2.0]);
        let s = tape.sum(y).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[0.0, 1.0]);
    }

    #[test]
    fn dot_self_gradient_is_twice_input() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(vec![1.0, 2.0]));
        let y = tape.dot(x, x).unwrap();
        assert_eq!(tape.value(y).item(), 5.0);
        let g = tape.backward(y).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[2.0, 4.0]);
    }

    #[test]
    fn matmul_shape_mismatch() {
        let mut tape = Tape::new();
        let a = tape.param(Tensor::zeros(&[2, 3]));
        let b = tape.param(Tensor::zeros(&[2, 3]));
        assert!(matches!(tape.matmul(a, b), Err(NumericsError::ShapeMismatch { .. })));
    }

    #[test]
    fn overflow_is_reported() {
        let mut tape = Tape::new();
        let a = tape.param(Tensor::vector(vec![f64::MAX]));
        assert!(matches!(
            tape.scalar_mul(a, 10.0),
            Err(NumericsError::NonFiniteValue { .. })
        ));
        let z = tape.param(Tensor::vector(vec![0.0]));
        assert!(tape.log(z).is_err());
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut tape = Tape::new();
        let c = tape.constant(Tensor::vector(vec![3.0]));
        let x = tape.param(Tensor::vector(vec![2.0]));
        let y = tape.dot(c, x).unwrap();
        let g = tape.backward(y).unwrap();
        assert!(g.get(c).is_none());
        assert_eq!(g.get(x).unwrap().data(), &[3.0]);
    }

    #[test]
    fn cross_entropy_uniform_logits_is_log_classes() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::zeros(&[2, 4]));
        let l = tape.cross_entropy_with_logits(x, &[0, 3]).unwrap();
        assert!((tape.value(l).item() - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn backward_requires_scalar() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(vec![1.0, 2.0]));
        assert!(matches!(tape.backward(x), Err(NumericsError::NotScalar { .. })));
    }
}
