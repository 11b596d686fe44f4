//! Define-by-run reverse-mode differentiation over dense matrices.
//!
//! Every operation appends a node holding its value; [`Tape::backward`]
//! walks the nodes in reverse and accumulates gradients for every node that
//! depends on a parameter. Nodes are appended in evaluation order, so inputs
//! always precede their consumers.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, SparseMatrix};

/// Logits are clamped to this magnitude before any log-sigmoid.
pub const LOGIT_CLAMP: f32 = 30.0;

/// Handle to a node on a [`Tape`].
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
    SpMM(Arc<SparseMatrix>, Var),
    GatherRows(Var, Arc<Vec<usize>>),
    Transpose(Var),
    ConcatCols(Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, f32),
    Prelu(Var, Var),
    Sigmoid(Var),
    LogSigmoid(Var),
    LogClamped(Var, f32),
    MeanRows(Var),
    Mean(Var),
    Sum(Var),
    RowDot(Var, Var),
    RowCosine(Var, Var),
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Matrix,
    requires_grad: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Takes ownership of a gradient, leaving `None` behind.
    pub fn take(&mut self, v: Var) -> Option<Matrix> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn dim_err(op: &'static str, a: &Matrix, b: &Matrix) -> Error {
    Error::Dimension {
        op,
        left: a.shape(),
        right: b.shape(),
    }
}

#[inline]
fn sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln σ(x)` without overflow.
#[inline]
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
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

    fn push(&mut self, op: Op, value: Matrix, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    /// Constant input; no gradient is tracked for it.
    pub fn constant(&mut self, m: Matrix) -> Var {
        self.push(Op::Leaf, m, false)
    }

    /// Trainable input; [`Tape::backward`] reports its gradient.
    pub fn param(&mut self, m: Matrix) -> Var {
        self.push(Op::Leaf, m, true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::MatMul(a, b), value, rg))
    }

    pub fn spmm(&mut self, s: &Arc<SparseMatrix>, x: Var) -> Result<Var> {
        let value = s.spmm(self.value(x))?;
        let rg = self.rg(x);
        Ok(self.push(Op::SpMM(Arc::clone(s), x), value, rg))
    }

    /// Row `k` of the result is row `idx[k]` of `x`. Covers both row
    /// permutations and pair lookups.
    pub fn gather_rows(&mut self, x: Var, idx: &Arc<Vec<usize>>) -> Result<Var> {
        let src = self.value(x);
        if let Some(&bad) = idx.iter().find(|&&i| i >= src.rows()) {
            return Err(Error::contract(format!(
                "row index {bad} out of range for {} rows",
                src.rows()
            )));
        }
        let mut data = Vec::with_capacity(idx.len() * src.cols());
        for &i in idx.iter() {
            data.extend_from_slice(src.row(i));
        }
        let value = Matrix::from_vec(idx.len(), src.cols(), data)?;
        let rg = self.rg(x);
        Ok(self.push(Op::GatherRows(x, Arc::clone(idx)), value, rg))
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        let value = self.value(x).transpose();
        let rg = self.rg(x);
        self.push(Op::Transpose(x), value, rg)
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ma, mb) = (self.value(a), self.value(b));
        if ma.rows() != mb.rows() {
            return Err(dim_err("concat_cols", ma, mb));
        }
        let mut out = Matrix::zeros(ma.rows(), ma.cols() + mb.cols());
        for r in 0..ma.rows() {
            let row = out.row_mut(r);
            row[..ma.cols()].copy_from_slice(ma.row(r));
            row[ma.cols()..].copy_from_slice(mb.row(r));
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::ConcatCols(a, b), out, rg))
    }

    /// Adds the 1×c row `b` to every row of `x`.
    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var> {
        let (mx, mb) = (self.value(x), self.value(b));
        if mb.rows() != 1 || mb.cols() != mx.cols() {
            return Err(dim_err("add_row", mx, mb));
        }
        let mut out = mx.clone();
        for r in 0..out.rows() {
            for (o, &v) in out.row_mut(r).iter_mut().zip(mb.row(0)) {
                *o += v;
            }
        }
        let rg = self.rg(x) || self.rg(b);
        Ok(self.push(Op::AddRow(x, b), out, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::Add(a, b), value, rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).sub(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::Sub(a, b), value, rg))
    }

    pub fn scale(&mut self, x: Var, k: f32) -> Var {
        let value = self.value(x).scale(k);
        let rg = self.rg(x);
        self.push(Op::Scale(x, k), value, rg)
    }

    pub fn neg(&mut self, x: Var) -> Var {
        self.scale(x, -1.0)
    }

    /// PReLU with a single learnable slope held in a 1×1 node.
    pub fn prelu(&mut self, x: Var, slope: Var) -> Result<Var> {
        let ms = self.value(slope);
        if ms.shape() != (1, 1) {
            return Err(dim_err("prelu", self.value(x), ms));
        }
        let a = ms.item();
        let value = self.value(x).map(|v| if v < 0.0 { a * v } else { v });
        let rg = self.rg(x) || self.rg(slope);
        Ok(self.push(Op::Prelu(x, slope), value, rg))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = self.value(x).map(sigmoid);
        let rg = self.rg(x);
        self.push(Op::Sigmoid(x), value, rg)
    }

    /// `ln σ(clamp(x, ±LOGIT_CLAMP))`.
    pub fn log_sigmoid(&mut self, x: Var) -> Var {
        let value = self
            .value(x)
            .map(|v| log_sigmoid(v.clamp(-LOGIT_CLAMP, LOGIT_CLAMP) as f64) as f32);
        let rg = self.rg(x);
        self.push(Op::LogSigmoid(x), value, rg)
    }

    /// `ln max(x, floor)`.
    pub fn log_clamped(&mut self, x: Var, floor: f32) -> Var {
        let value = self.value(x).map(|v| v.max(floor).ln());
        let rg = self.rg(x);
        self.push(Op::LogClamped(x, floor), value, rg)
    }

    /// Column means as a 1×c row.
    pub fn mean_rows(&mut self, x: Var) -> Var {
        let value = self.value(x).column_means();
        let rg = self.rg(x);
        self.push(Op::MeanRows(x), value, rg)
    }

    /// Mean of every entry as a 1×1 node.
    pub fn mean(&mut self, x: Var) -> Var {
        let m = self.value(x);
        let n = m.data().len();
        let s: f64 = m.data().iter().map(|&v| v as f64).sum();
        let value = Matrix::scalar(if n == 0 { 0.0 } else { (s / n as f64) as f32 });
        let rg = self.rg(x);
        self.push(Op::Mean(x), value, rg)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s: f64 = self.value(x).data().iter().map(|&v| v as f64).sum();
        let rg = self.rg(x);
        self.push(Op::Sum(x), Matrix::scalar(s as f32), rg)
    }

    /// Row-wise dot products as an n×1 column.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ma, mb) = (self.value(a), self.value(b));
        if ma.shape() != mb.shape() {
            return Err(dim_err("row_dot", ma, mb));
        }
        let data = (0..ma.rows())
            .map(|r| dot64(ma.row(r), mb.row(r)) as f32)
            .collect();
        let value = Matrix::from_vec(ma.rows(), 1, data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::RowDot(a, b), value, rg))
    }

    /// Row-wise cosine similarity as an n×1 column; rows with zero norm
    /// score 0 and pass no gradient.
    pub fn row_cosine(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ma, mb) = (self.value(a), self.value(b));
        if ma.shape() != mb.shape() {
            return Err(dim_err("row_cosine", ma, mb));
        }
        let data = (0..ma.rows())
            .map(|r| cosine64(ma.row(r), mb.row(r)).0 as f32)
            .collect();
        let value = Matrix::from_vec(ma.rows(), 1, data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::RowCosine(a, b), value, rg))
    }

    /// Reverse sweep from a 1×1 `loss` node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.shape() != (1, 1) {
            return Err(Error::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let g = match &node.op {
                Op::Leaf => continue,
                _ => match grads[idx].take() {
                    Some(g) => g,
                    None => continue,
                },
            };
            self.propagate(node, &g, &mut grads)?;
        }
        // Only leaves keep their gradients.
        for (i, node) in self.nodes.iter().enumerate() {
            if !(matches!(node.op, Op::Leaf) && node.requires_grad) {
                grads[i] = None;
            }
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &Matrix, grads: &mut [Option<Matrix>]) -> Result<()> {
        let mut acc = |v: Var, d: Matrix| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&d),
                slot @ None => *slot = Some(d),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.rg(*a) {
                    acc(*a, g.matmul_nt(self.value(*b))?);
                }
                if self.rg(*b) {
                    acc(*b, self.value(*a).matmul_tn(g)?);
                }
            }
            Op::SpMM(s, x) => acc(*x, s.spmm_transposed(g)?),
            Op::GatherRows(x, idx) => {
                if self.rg(*x) {
                    acc(*x, scatter_rows(g, idx, self.value(*x).rows())?);
                }
            }
            Op::Transpose(x) => acc(*x, g.transpose()),
            Op::ConcatCols(a, b) => {
                let ca = self.value(*a).cols();
                let cb = self.value(*b).cols();
                let mut ga = Matrix::zeros(g.rows(), ca);
                let mut gb = Matrix::zeros(g.rows(), cb);
                for r in 0..g.rows() {
                    ga.row_mut(r).copy_from_slice(&g.row(r)[..ca]);
                    gb.row_mut(r).copy_from_slice(&g.row(r)[ca..]);
                }
                acc(*a, ga);
                acc(*b, gb);
            }
            Op::AddRow(x, b) => {
                acc(*x, g.clone());
                let mut sums = vec![0f64; g.cols()];
                for r in 0..g.rows() {
                    for (s, &v) in sums.iter_mut().zip(g.row(r)) {
                        *s += v as f64;
                    }
                }
                acc(
                    *b,
                    Matrix::from_vec(1, g.cols(), sums.into_iter().map(|v| v as f32).collect())?,
                );
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.scale(-1.0));
            }
            Op::Scale(x, k) => acc(*x, g.scale(*k)),
            Op::Prelu(x, slope) => {
                let a = self.value(*slope).item();
                let (dx, ds) = prelu_backward(self.value(*x).data(), g.data(), a);
                if self.rg(*x) {
                    acc(*x, Matrix::from_vec(g.rows(), g.cols(), dx)?);
                }
                if self.rg(*slope) {
                    acc(*slope, Matrix::scalar(ds as f32));
                }
            }
            Op::Sigmoid(x) => {
                let mut d = g.clone();
                for (dv, &y) in d.data_mut().iter_mut().zip(node.value.data()) {
                    *dv *= y * (1.0 - y);
                }
                acc(*x, d);
            }
            Op::LogSigmoid(x) => {
                let mut d = g.clone();
                for (dv, &v) in d.data_mut().iter_mut().zip(self.value(*x).data()) {
                    *dv *= if v.abs() > LOGIT_CLAMP { 0.0 } else { sigmoid(-v) };
                }
                acc(*x, d);
            }
            Op::LogClamped(x, floor) => {
                let mut d = g.clone();
                for (dv, &v) in d.data_mut().iter_mut().zip(self.value(*x).data()) {
                    *dv = if v > *floor { *dv / v } else { 0.0 };
                }
                acc(*x, d);
            }
            Op::MeanRows(x) => {
                let (n, c) = self.value(*x).shape();
                let inv = 1.0 / n as f32;
                let row: Vec<f32> = g.row(0).iter().map(|v| v * inv).collect();
                let mut d = Matrix::zeros(n, c);
                for r in 0..n {
                    d.row_mut(r).copy_from_slice(&row);
                }
                acc(*x, d);
            }
            Op::Mean(x) => {
                let (r, c) = self.value(*x).shape();
                let k = g.item() / (r * c).max(1) as f32;
                acc(*x, Matrix::filled(r, c, k));
            }
            Op::Sum(x) => {
                let (r, c) = self.value(*x).shape();
                acc(*x, Matrix::filled(r, c, g.item()));
            }
            Op::RowDot(a, b) => {
                let (ma, mb) = (self.value(*a), self.value(*b));
                let scale_rows = |m: &Matrix| {
                    let mut out = m.clone();
                    for r in 0..out.rows() {
                        let k = g.get(r, 0);
                        out.row_mut(r).iter_mut().for_each(|v| *v *= k);
                    }
                    out
                };
                if self.rg(*a) {
                    acc(*a, scale_rows(mb));
                }
                if self.rg(*b) {
                    acc(*b, scale_rows(ma));
                }
            }
            Op::RowCosine(a, b) => {
                let (ma, mb) = (self.value(*a), self.value(*b));
                let mut da = Matrix::zeros(ma.rows(), ma.cols());
                let mut db = Matrix::zeros(mb.rows(), mb.cols());
                for r in 0..ma.rows() {
                    let (cos, na, nb) = cosine64(ma.row(r), mb.row(r));
                    if na == 0.0 || nb == 0.0 {
                        continue;
                    }
                    let gr = g.get(r, 0) as f64;
                    let inv = 1.0 / (na * nb);
                    let (ra, rb) = (ma.row(r), mb.row(r));
                    for ((o, &x), &y) in da.row_mut(r).iter_mut().zip(ra).zip(rb) {
                        *o = (gr * (y as f64 * inv - cos * x as f64 / (na * na))) as f32;
                    }
                    for ((o, &y), &x) in db.row_mut(r).iter_mut().zip(rb).zip(ra) {
                        *o = (gr * (x as f64 * inv - cos * y as f64 / (nb * nb))) as f32;
                    }
                }
                acc(*a, da);
                acc(*b, db);
            }
        }
        Ok(())
    }
}

pub(crate) fn dot64(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

/// `(cos, ‖a‖, ‖b‖)` in `f64`; cosine is 0 when either norm is 0.
pub(crate) fn cosine64(a: &[f32], b: &[f32]) -> (f64, f64, f64) {
    let na2 = dot64(a, a);
    let nb2 = dot64(b, b);
    if na2 == 0.0 || nb2 == 0.0 {
        return (0.0, na2.sqrt(), nb2.sqrt());
    }
    let cos = dot64(a, b) / (na2 * nb2).sqrt();
    (cos.clamp(-1.0, 1.0), na2.sqrt(), nb2.sqrt())
}

/// Gradients of PReLU: `(∂x, ∂slope)`. The slope gradient is summed in
/// eight interleaved `f64` lanes.
fn prelu_backward(x: &[f32], g: &[f32], a: f32) -> (Vec<f32>, f64) {
    let mut dx = vec![0f32; x.len()];
    let mut lanes = [0f64; 8];
    let mut xs = x.chunks_exact(8);
    let mut gs = g.chunks_exact(8);
    let mut ds = dx.chunks_exact_mut(8);
    for ((xc, gc), dc) in (&mut xs).zip(&mut gs).zip(&mut ds) {
        for l in 0..8 {
            let neg = xc[l] < 0.0;
            lanes[l] += if neg { xc[l] as f64 * gc[l] as f64 } else { 0.0 };
            dc[l] = if neg { gc[l] * a } else { gc[l] };
        }
    }
    for ((&v, &gv), d) in xs.remainder().iter().zip(gs.remainder()).zip(ds.into_remainder()) {
        let neg = v < 0.0;
        lanes[0] += if neg { v as f64 * gv as f64 } else { 0.0 };
        *d = if neg { gv * a } else { gv };
    }
    (dx, lanes.iter().sum())
}

/// Adjoint of a row gather: sums the rows of `g` into the source rows they
/// were read from, in gather order.
fn scatter_rows(g: &Matrix, idx: &[usize], rows: usize) -> Result<Matrix> {
    let c = g.cols();
    let mut offsets = vec![0usize; rows + 1];
    for &i in idx {
        offsets[i + 1] += 1;
    }
    let mut out = Matrix::zeros(rows, c);
    if offsets.iter().all(|&n| n <= 1) {
        for (k, &i) in idx.iter().enumerate() {
            out.row_mut(i).copy_from_slice(g.row(k));
        }
        return Ok(out);
    }
    for i in 0..rows {
        offsets[i + 1] += offsets[i];
    }
    let mut next = offsets.clone();
    let mut order = vec![0usize; idx.len()];
    for (k, &i) in idx.iter().enumerate() {
        order[next[i]] = k;
        next[i] += 1;
    }
    let mut buf = vec![0f64; c];
    for i in 0..rows {
        let group = &order[offsets[i]..offsets[i + 1]];
        if group.is_empty() {
            continue;
        }
        buf.iter_mut().for_each(|b| *b = 0.0);
        for &k in group {
            for (b, &v) in buf.iter_mut().zip(g.row(k)) {
                *b += v as f64;
            }
        }
        for (o, &b) in out.row_mut(i).iter_mut().zip(&buf) {
            *o = b as f32;
        }
    }
    Ok(out)
}
