//! Dense real tensors with tape-based reverse-mode differentiation.
//!
//! A [`Tape`] records every operation in the order it is executed, so the
//! record list is already topologically sorted. [`Tape::backward`] walks it
//! once in reverse and accumulates gradients for every node that the loss
//! depends on. Only the handful of operations needed by the receiver model
//! are provided; most of them operate on 2-D `[rows × cols]` tensors.

mod gradcheck;
pub(crate) mod kernels;

pub use gradcheck::{grad_check, grad_check_probes};

use kernels::{mm_nn, mm_nt, mm_tn};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("{op}: dimension mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("invalid tensor shape {shape:?} for {len} values")]
    InvalidShape { shape: Vec<usize>, len: usize },
    #[error("loss must be a scalar of shape [1], got {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("{op}: index {index} out of range for {len} elements")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        len: usize,
    },
}

/// Row-major block of `f64` values with 1 to 3 dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, TensorError> {
        let valid = (1..=3).contains(&shape.len())
            && shape.iter().all(|&d| d > 0)
            && shape.iter().product::<usize>() == data.len();
        if !valid {
            return Err(TensorError::InvalidShape {
                len: data.len(),
                shape,
            });
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor::new(shape.to_vec(), vec![0.0; len]).expect("zeros: invalid shape")
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor::new(vec![data.len()], data).expect("vector: empty data")
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, TensorError> {
        Tensor::new(vec![rows, cols], data)
    }

    /// Builds a matrix from nested rows; panics on ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows[0].len();
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Tensor::new(vec![rows.len(), cols], rows.concat()).expect("from_rows: empty")
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Number of rows when viewed as a matrix (1 for vectors).
    pub fn rows(&self) -> usize {
        match self.shape.len() {
            1 => 1,
            _ => self.shape[..self.shape.len() - 1].iter().product(),
        }
    }

    /// Size of the last dimension.
    pub fn cols(&self) -> usize {
        *self.shape.last().unwrap()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols() + col]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Handle to a node recorded on a [`Tape`].
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
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Transpose(Var),
    SoftmaxRows(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        normalized: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    ScaleBy(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    AddRow(Var, Var),
    ConcatCols(Vec<Var>),
    Select(Var, Vec<usize>),
    Sum(Var),
    Mean(Var),
    BceLlr { llr: Var, targets: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Elementwise operation selector used by [`Tape::elementwise`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Elementwise {
    Add,
    Sub,
    Scale(f64),
    Relu,
    Sigmoid,
}

/// Ordered record of operations and their forward values.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by node.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `var`, or `None` when the loss
    /// does not depend on it.
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(|g| g.as_ref())
    }

    /// Like [`Gradients::get`] but substitutes zeros of the right shape.
    pub fn get_or_zeros(&self, var: Var, shape: &[usize]) -> Tensor {
        self.get(var).cloned().unwrap_or_else(|| Tensor::zeros(shape))
    }
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        left: a.shape.clone(),
        right: b.shape.clone(),
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    fn matrix_dims(&self, var: Var) -> (usize, usize) {
        let t = self.value(var);
        (t.rows(), t.cols())
    }

    /// `[n×k] · [k×m] → [n×m]`
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape.len() != 2 || tb.shape.len() != 2 || ta.shape[1] != tb.shape[0] {
            return Err(mismatch("matmul", ta, tb));
        }
        let (n, k, m) = (ta.shape[0], ta.shape[1], tb.shape[1]);
        let mut out = vec![0.0; n * m];
        mm_nn(&ta.data, &tb.data, &mut out, n, k, m);
        Ok(self.push(Tensor::new(vec![n, m], out)?, Op::MatMul(a, b)))
    }

    /// `[n×k] · [m×k]ᵀ → [n×m]`, the shape of a linear layer with weights
    /// stored as `[out × in]`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape.len() != 2 || tb.shape.len() != 2 || ta.shape[1] != tb.shape[1] {
            return Err(mismatch("matmul_nt", ta, tb));
        }
        let (n, k, m) = (ta.shape[0], ta.shape[1], tb.shape[0]);
        let mut out = vec![0.0; n * m];
        mm_nt(&ta.data, &tb.data, &mut out, n, k, m);
        Ok(self.push(Tensor::new(vec![n, m], out)?, Op::MatMulNt(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, TensorError> {
        let ta = self.value(a);
        if ta.shape.len() != 2 {
            return Err(TensorError::InvalidShape {
                shape: ta.shape.clone(),
                len: ta.len(),
            });
        }
        let (n, m) = (ta.shape[0], ta.shape[1]);
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                out[j * n + i] = ta.data[i * m + j];
            }
        }
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::Transpose(a)))
    }

    /// Row-wise softmax, stabilized by subtracting each row's maximum.
    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let (n, m) = (ta.rows(), ta.cols());
        let mut out = ta.data.clone();
        for row in out.chunks_mut(m) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        debug_assert_eq!(out.len(), n * m);
        let shape = ta.shape.clone();
        self.push(Tensor { shape, data: out }, Op::SoftmaxRows(a))
    }

    /// Per-row normalization to zero mean and unit variance followed by an
    /// affine map with `gain` and `bias` of length `cols`.
    pub fn layer_norm(
        &mut self,
        x: Var,
        gain: Var,
        bias: Var,
        eps: f64,
    ) -> Result<Var, TensorError> {
        let (tx, tg, tb) = (self.value(x), self.value(gain), self.value(bias));
        let m = tx.cols();
        if tg.len() != m {
            return Err(mismatch("layer_norm", tx, tg));
        }
        if tb.len() != m {
            return Err(mismatch("layer_norm", tx, tb));
        }
        let n = tx.rows();
        let mut normalized = vec![0.0; n * m];
        let mut inv_std = vec![0.0; n];
        let mut out = vec![0.0; n * m];
        for r in 0..n {
            let row = &tx.data[r * m..(r + 1) * m];
            let mean = row.iter().sum::<f64>() / m as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std[r] = is;
            for c in 0..m {
                let z = (row[c] - mean) * is;
                normalized[r * m + c] = z;
                out[r * m + c] = z * tg.data[c] + tb.data[c];
            }
        }
        let shape = tx.shape.clone();
        Ok(self.push(
            Tensor { shape, data: out },
            Op::LayerNorm {
                x,
                gain,
                bias,
                normalized,
                inv_std,
            },
        ))
    }

    fn binary(
        &mut self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor, TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape != tb.shape {
            return Err(mismatch(op, ta, tb));
        }
        let data = ta.data.iter().zip(&tb.data).map(|(&x, &y)| f(x, y)).collect();
        Ok(Tensor {
            shape: ta.shape.clone(),
            data,
        })
    }

    fn unary(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let ta = self.value(a);
        Tensor {
            shape: ta.shape.clone(),
            data: ta.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let t = self.binary("add", a, b, |x, y| x + y)?;
        Ok(self.push(t, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let t = self.binary("sub", a, b, |x, y| x - y)?;
        Ok(self.push(t, Op::Sub(a, b)))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let t = self.binary("mul", a, b, |x, y| x * y)?;
        Ok(self.push(t, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let t = self.unary(a, |v| v * factor);
        self.push(t, Op::Scale(a, factor))
    }

    /// Multiplies every element of `a` by the single value held in `s`.
    pub fn scale_by(&mut self, a: Var, s: Var) -> Result<Var, TensorError> {
        let ts = self.value(s);
        if ts.len() != 1 {
            return Err(mismatch("scale_by", self.value(a), ts));
        }
        let f = ts.data[0];
        let t = self.unary(a, |v| v * f);
        Ok(self.push(t, Op::ScaleBy(a, s)))
    }

    /// Rectifier; the subgradient at 0 is 0 and NaN passes through.
    pub fn relu(&mut self, a: Var) -> Var {
        let t = self.unary(a, |v| if v > 0.0 || v.is_nan() { v } else { 0.0 });
        self.push(t, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let t = self.unary(a, kernels::sigmoid);
        self.push(t, Op::Sigmoid(a))
    }

    /// Dispatches one of the elementwise kinds. `b` is required for the
    /// binary kinds and ignored otherwise.
    pub fn elementwise(
        &mut self,
        a: Var,
        b: Option<Var>,
        kind: Elementwise,
    ) -> Result<Var, TensorError> {
        let need = |b: Option<Var>| {
            b.ok_or(TensorError::ShapeMismatch {
                op: "elementwise",
                left: self.value(a).shape.clone(),
                right: vec![],
            })
        };
        match kind {
            Elementwise::Add => {
                let b = need(b)?;
                self.add(a, b)
            }
            Elementwise::Sub => {
                let b = need(b)?;
                self.sub(a, b)
            }
            Elementwise::Scale(f) => Ok(self.scale(a, f)),
            Elementwise::Relu => Ok(self.relu(a)),
            Elementwise::Sigmoid => Ok(self.sigmoid(a)),
        }
    }

    /// Adds a length-`cols` vector to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, TensorError> {
        let (ta, tr) = (self.value(a), self.value(row));
        let m = ta.cols();
        if tr.len() != m {
            return Err(mismatch("add_row", ta, tr));
        }
        let data = ta
            .data
            .iter()
            .enumerate()
            .map(|(i, &v)| v + tr.data[i % m])
            .collect();
        let t = Tensor {
            shape: ta.shape.clone(),
            data,
        };
        Ok(self.push(t, Op::AddRow(a, row)))
    }

    /// Horizontal concatenation of matrices with equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let first = self.value(parts[0]);
        let n = first.rows();
        for &p in &parts[1..] {
            if self.value(p).rows() != n || self.value(p).shape.len() != 2 {
                return Err(mismatch("concat_cols", first, self.value(p)));
            }
        }
        let widths: Vec<usize> = parts.iter().map(|&p| self.value(p).cols()).collect();
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(n * total);
        for r in 0..n {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p).data[r * w..(r + 1) * w]);
            }
        }
        let t = Tensor::new(vec![n, total], out)?;
        Ok(self.push(t, Op::ConcatCols(parts.to_vec())))
    }

    /// Gathers flat (row-major) positions of `a` into a 1-D tensor.
    pub fn select(&mut self, a: Var, indices: Vec<usize>) -> Result<Var, TensorError> {
        let ta = self.value(a);
        if let Some(&bad) = indices.iter().find(|&&i| i >= ta.len()) {
            return Err(TensorError::IndexOutOfRange {
                op: "select",
                index: bad,
                len: ta.len(),
            });
        }
        let data: Vec<f64> = indices.iter().map(|&i| ta.data[i]).collect();
        let t = Tensor::new(vec![data.len()], data)?;
        Ok(self.push(t, Op::Select(a, indices)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data.iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let s = t.data.iter().sum::<f64>() / t.len() as f64;
        self.push(Tensor::scalar(s), Op::Mean(a))
    }

    /// Mean binary cross-entropy between LLRs (positive favors bit 0) and
    /// target bits in `{0, 1}`:
    /// `b·softplus(L) + (1−b)·softplus(−L)` averaged over all entries.
    pub fn bce_llr(&mut self, llr: Var, targets: &[f64]) -> Result<Var, TensorError> {
        let tl = self.value(llr);
        if tl.len() != targets.len() {
            return Err(TensorError::ShapeMismatch {
                op: "bce_llr",
                left: tl.shape.clone(),
                right: vec![targets.len()],
            });
        }
        let loss = tl
            .data
            .iter()
            .zip(targets)
            .map(|(&l, &b)| b * kernels::softplus(l) + (1.0 - b) * kernels::softplus(-l))
            .sum::<f64>()
            / targets.len() as f64;
        Ok(self.push(
            Tensor::scalar(loss),
            Op::BceLlr {
                llr,
                targets: targets.to_vec(),
            },
        ))
    }

    /// Reverse pass from a scalar `loss` node.
    pub fn backward(&self, loss: Var) -> Result<Gradients, TensorError> {
        let lt = self.value(loss);
        if lt.shape != [1] {
            return Err(TensorError::NonScalarLoss(lt.shape.clone()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }

        let grads = grads
            .into_iter()
            .enumerate()
            .map(|(i, g)| {
                g.map(|data| Tensor {
                    shape: self.nodes[i].value.shape.clone(),
                    data,
                })
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        // Each call to `acc` borrows one gradient slot at a time.
        fn acc<'a>(
            tape: &Tape,
            grads: &'a mut [Option<Vec<f64>>],
            v: Var,
        ) -> &'a mut Vec<f64> {
            let len = tape.nodes[v.0].value.len();
            grads[v.0].get_or_insert_with(|| vec![0.0; len])
        }
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (n, k, m) = (ta.shape[0], ta.shape[1], tb.shape[1]);
                mm_nt(g, &tb.data, acc(self, grads, *a), n, m, k);
                mm_tn(&ta.data, g, acc(self, grads, *b), n, k, m);
            }
            Op::MatMulNt(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (n, k, m) = (ta.shape[0], ta.shape[1], tb.shape[0]);
                // C = A·Bᵀ: dA = dC·B, dB = dCᵀ·A
                mm_nn(g, &tb.data, acc(self, grads, *a), n, m, k);
                mm_tn(g, &ta.data, acc(self, grads, *b), n, m, k);
            }
            Op::Transpose(a) => {
                let (n, m) = self.matrix_dims(*a);
                let ga = acc(self, grads, *a);
                for i in 0..n {
                    for j in 0..m {
                        ga[i * m + j] += g[j * n + i];
                    }
                }
            }
            Op::SoftmaxRows(a) => {
                let y = &node.value.data;
                let m = node.value.cols();
                let ga = acc(self, grads, *a);
                for ((yr, gr), gar) in y.chunks(m).zip(g.chunks(m)).zip(ga.chunks_mut(m)) {
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for c in 0..m {
                        gar[c] += yr[c] * (gr[c] - dot);
                    }
                }
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                normalized,
                inv_std,
            } => {
                let m = node.value.cols();
                let n = node.value.rows();
                let gain_v = &self.value(*gain).data;
                {
                    let gg = acc(self, grads, *gain);
                    for r in 0..n {
                        for c in 0..m {
                            gg[c] += g[r * m + c] * normalized[r * m + c];
                        }
                    }
                }
                {
                    let gb = acc(self, grads, *bias);
                    for r in 0..n {
                        for c in 0..m {
                            gb[c] += g[r * m + c];
                        }
                    }
                }
                let gx = acc(self, grads, *x);
                let mf = m as f64;
                for r in 0..n {
                    let z = &normalized[r * m..(r + 1) * m];
                    let dz: Vec<f64> = (0..m).map(|c| g[r * m + c] * gain_v[c]).collect();
                    let mean_dz = dz.iter().sum::<f64>() / mf;
                    let mean_dz_z = dz.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() / mf;
                    for c in 0..m {
                        gx[r * m + c] += inv_std[r] * (dz[c] - mean_dz - z[c] * mean_dz_z);
                    }
                }
            }
            Op::Add(a, b) => {
                add_into(acc(self, grads, *a), g, 1.0);
                add_into(acc(self, grads, *b), g, 1.0);
            }
            Op::Sub(a, b) => {
                add_into(acc(self, grads, *a), g, 1.0);
                add_into(acc(self, grads, *b), g, -1.0);
            }
            Op::Mul(a, b) => {
                let (va, vb) = (&self.value(*a).data, &self.value(*b).data);
                for (o, (gi, bi)) in acc(self, grads, *a).iter_mut().zip(g.iter().zip(vb)) {
                    *o += gi * bi;
                }
                for (o, (gi, ai)) in acc(self, grads, *b).iter_mut().zip(g.iter().zip(va)) {
                    *o += gi * ai;
                }
            }
            Op::Scale(a, f) => add_into(acc(self, grads, *a), g, *f),
            Op::ScaleBy(a, s) => {
                let f = self.value(*s).data[0];
                let va = &self.value(*a).data;
                let ds: f64 = g.iter().zip(va).map(|(x, y)| x * y).sum();
                add_into(acc(self, grads, *a), g, f);
                acc(self, grads, *s)[0] += ds;
            }
            Op::Relu(a) => {
                let va = &self.value(*a).data;
                for (o, (gi, xi)) in acc(self, grads, *a).iter_mut().zip(g.iter().zip(va)) {
                    if *xi > 0.0 {
                        *o += gi;
                    }
                }
            }
            Op::Sigmoid(a) => {
                let y = &node.value.data;
                for (o, (gi, yi)) in acc(self, grads, *a).iter_mut().zip(g.iter().zip(y)) {
                    *o += gi * yi * (1.0 - yi);
                }
            }
            Op::AddRow(a, row) => {
                let m = node.value.cols();
                add_into(acc(self, grads, *a), g, 1.0);
                let gr = acc(self, grads, *row);
                for (i, gi) in g.iter().enumerate() {
                    gr[i % m] += gi;
                }
            }
            Op::ConcatCols(parts) => {
                let n = node.value.rows();
                let total = node.value.cols();
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    let gp = acc(self, grads, p);
                    for r in 0..n {
                        for c in 0..w {
                            gp[r * w + c] += g[r * total + offset + c];
                        }
                    }
                    offset += w;
                }
            }
            Op::Select(a, indices) => {
                let ga = acc(self, grads, *a);
                for (&i, gi) in indices.iter().zip(g) {
                    ga[i] += gi;
                }
            }
            Op::Sum(a) => {
                for o in acc(self, grads, *a).iter_mut() {
                    *o += g[0];
                }
            }
            Op::Mean(a) => {
                let ga = acc(self, grads, *a);
                let f = g[0] / ga.len() as f64;
                for o in ga.iter_mut() {
                    *o += f;
                }
            }
            Op::BceLlr { llr, targets } => {
                let vl = &self.value(*llr).data;
                let f = g[0] / targets.len() as f64;
                for (o, (l, b)) in acc(self, grads, *llr).iter_mut().zip(vl.iter().zip(targets)) {
                    *o += f * (kernels::sigmoid(*l) - (1.0 - b));
                }
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64], factor: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += factor * s;
    }
}
