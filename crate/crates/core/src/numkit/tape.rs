//! Tape-based reverse-mode automatic differentiation.
//!
//! A [`Tape`] records every operation applied to [`Var`] handles in the order
//! it was executed, so node ids are already a topological order: each input
//! id is strictly smaller than the id of the node consuming it. Backward is a
//! single reverse sweep over that list.
//!
//! ```
//! use gcllab::numkit::{Tape, Tensor};
//!
//! let tape = Tape::new();
//! let w = tape.param(Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap());
//! let loss = w.hadamard(w).unwrap().sum().scale(0.5);
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.wrt(w), w.value());
//! ```

use std::cell::RefCell;
use std::sync::Arc;

use super::sparse::SparseMatrix;
use super::tensor::{Tensor, NORM_EPS};
use crate::error::{Error, Result};

type Id = usize;

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Id, Id),
    /// `a · bᵀ`
    MatMulT(Id, Id),
    Transpose(Id),
    SpMM(Arc<SparseMatrix>, Id),
    Relu(Id),
    Exp(Id),
    Log(Id),
    Add(Id, Id),
    Sub(Id, Id),
    Scale(Id, f64),
    Hadamard(Id, Id),
    /// `1×1` variable times a tensor.
    ScalarMul(Id, Id),
    /// Saves the clamped row norms.
    RowNormalize(Id, Vec<f64>),
    RowSoftmax(Id),
    /// `out_i = log Σ_j w_ij exp(x_ij)`; zero weights exclude entries.
    /// Input id and the weighted softmax `∂lse_i/∂x_ij` saved by the forward pass.
    RowLogSumExp(Id, Tensor),
    Sum(Id),
    RowSum(Id),
    ConcatCols(Id, Id),
    SelectRows(Id, Arc<Vec<usize>>),
    ScaleRows(Id, Arc<Vec<f64>>),
    SegmentSum(Id, Arc<Vec<usize>>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Records operations for one forward/backward pass.
///
/// A tape is single-writer; create one per worker and per step.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: Id,
}

/// Result of [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`; zero when `v` does not
    /// influence the loss.
    pub fn wrt(&self, v: Var<'_>) -> Tensor {
        match &self.grads[v.id] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[v.id];
                Tensor::zeros(r, c)
            }
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Trainable leaf (gradients are accumulated for it).
    pub fn param(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf excluded from differentiation.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, false)
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    fn push(&self, value: Tensor, op: Op, needs_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn needs(&self, id: Id) -> bool {
        self.nodes.borrow()[id].needs_grad
    }

    fn with_value<R>(&self, id: Id, f: impl FnOnce(&Tensor) -> R) -> R {
        f(&self.nodes.borrow()[id].value)
    }

    fn unary(&self, a: Id, f: impl FnOnce(&Tensor) -> Result<(Tensor, Op)>) -> Result<Var<'_>> {
        let (value, op) = self.with_value(a, f)?;
        Ok(self.push(value, op, self.needs(a)))
    }

    fn binary(
        &self,
        a: Id,
        b: Id,
        f: impl FnOnce(&Tensor, &Tensor) -> Result<Tensor>,
        op: Op,
    ) -> Result<Var<'_>> {
        let value = {
            let nodes = self.nodes.borrow();
            f(&nodes[a].value, &nodes[b].value)?
        };
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, op, needs))
    }

    /// Reverse sweep from a `1×1` loss.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        let shapes: Vec<_> = nodes.iter().map(|n| n.value.shape()).collect();
        if shapes[loss.id] != (1, 1) {
            return Err(Error::shape(
                "backward",
                format!("loss must be 1x1, got {:?}", shapes[loss.id]),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; nodes.len()];
        grads[loss.id] = Some(Tensor::scalar(1.0));

        for id in (0..=loss.id).rev() {
            let node = &nodes[id];
            // Leaves keep their accumulated gradient; interior slots are consumed.
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            let out = &node.value;
            let val = |i: Id| &nodes[i].value;
            let mut acc = |i: Id, delta: Tensor| -> Result<()> {
                if !nodes[i].needs_grad {
                    return Ok(());
                }
                match &mut grads[i] {
                    Some(existing) => existing.axpy(1.0, &delta),
                    slot @ None => {
                        *slot = Some(delta);
                        Ok(())
                    }
                }
            };
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    if nodes[*a].needs_grad {
                        acc(*a, g.matmul_t(val(*b))?)?;
                    }
                    if nodes[*b].needs_grad {
                        acc(*b, val(*a).t_matmul(&g)?)?;
                    }
                }
                Op::MatMulT(a, b) => {
                    // out = a bᵀ: da = g b, db = gᵀ a
                    if nodes[*a].needs_grad {
                        acc(*a, g.matmul(val(*b))?)?;
                    }
                    if nodes[*b].needs_grad {
                        acc(*b, g.t_matmul(val(*a))?)?;
                    }
                }
                Op::Transpose(a) => acc(*a, g.transpose())?,
                Op::SpMM(m, a) => acc(*a, m.spmm_t(&g)?)?,
                Op::Relu(a) => {
                    let x = val(*a);
                    acc(
                        *a,
                        g.zip_with(x, "relu_backward", |gi, xi| if xi > 0.0 { gi } else { 0.0 })?,
                    )?
                }
                Op::Exp(a) => acc(*a, g.hadamard(out)?)?,
                Op::Log(a) => acc(*a, g.zip_with(val(*a), "log_backward", |gi, xi| gi / xi)?)?,
                Op::Add(a, b) => {
                    acc(*a, g.clone())?;
                    acc(*b, g)?;
                }
                Op::Sub(a, b) => {
                    acc(*a, g.clone())?;
                    acc(*b, g.scale(-1.0))?;
                }
                Op::Scale(a, s) => acc(*a, g.scale(*s))?,
                Op::Hadamard(a, b) => {
                    if nodes[*a].needs_grad {
                        acc(*a, g.hadamard(val(*b))?)?;
                    }
                    if nodes[*b].needs_grad {
                        acc(*b, g.hadamard(val(*a))?)?;
                    }
                }
                Op::ScalarMul(s, x) => {
                    let sv = val(*s).as_slice()[0];
                    if nodes[*s].needs_grad {
                        let ds: f64 = g
                            .as_slice()
                            .iter()
                            .zip(val(*x).as_slice())
                            .map(|(a, b)| a * b)
                            .sum();
                        acc(*s, Tensor::scalar(ds))?;
                    }
                    if nodes[*x].needs_grad {
                        acc(*x, g.scale(sv))?;
                    }
                }
                Op::RowNormalize(a, norms) => {
                    // y = x / max(‖x‖, eps). Above the floor dx = (g − y⟨y,g⟩)/‖x‖,
                    // at the floor the divisor is constant.
                    let mut dx = g.clone();
                    for (i, &nrm) in norms.iter().enumerate() {
                        let y = out.row(i);
                        let gi = g.row(i);
                        let row = dx.row_mut(i);
                        if nrm > NORM_EPS {
                            let yg: f64 = y.iter().zip(gi).map(|(a, b)| a * b).sum();
                            for ((d, &yv), &gv) in row.iter_mut().zip(y).zip(gi) {
                                *d = (gv - yv * yg) / nrm;
                            }
                        } else {
                            row.iter_mut().for_each(|d| *d /= NORM_EPS);
                        }
                    }
                    acc(*a, dx)?
                }
                Op::RowSoftmax(a) => {
                    let mut dx = Tensor::zeros(out.rows(), out.cols());
                    for i in 0..out.rows() {
                        let y = out.row(i);
                        let gi = g.row(i);
                        let yg: f64 = y.iter().zip(gi).map(|(a, b)| a * b).sum();
                        for ((d, &yv), &gv) in dx.row_mut(i).iter_mut().zip(y).zip(gi) {
                            *d = yv * (gv - yg);
                        }
                    }
                    acc(*a, dx)?
                }
                Op::RowLogSumExp(a, probs) => {
                    let mut dx = probs.clone();
                    for i in 0..dx.rows() {
                        let gi = g.get(i, 0);
                        dx.row_mut(i).iter_mut().for_each(|v| *v *= gi);
                    }
                    acc(*a, dx)?
                }
                Op::Sum(a) => {
                    let (r, c) = shapes[*a];
                    acc(*a, Tensor::full(r, c, g.as_slice()[0]))?
                }
                Op::RowSum(a) => {
                    let (r, c) = shapes[*a];
                    acc(*a, Tensor::from_fn(r, c, |i, _| g.get(i, 0)))?
                }
                Op::ConcatCols(a, b) => {
                    let ca = shapes[*a].1;
                    let cb = shapes[*b].1;
                    let ga = Tensor::from_fn(g.rows(), ca, |i, j| g.get(i, j));
                    let gb = Tensor::from_fn(g.rows(), cb, |i, j| g.get(i, ca + j));
                    acc(*a, ga)?;
                    acc(*b, gb)?;
                }
                Op::SelectRows(a, idx) => {
                    let (r, c) = shapes[*a];
                    let mut dx = Tensor::zeros(r, c);
                    for (k, &i) in idx.iter().enumerate() {
                        for (d, gv) in dx.row_mut(i).iter_mut().zip(g.row(k)) {
                            *d += gv;
                        }
                    }
                    acc(*a, dx)?
                }
                Op::ScaleRows(a, w) => acc(*a, g.scale_rows(w)?)?,
                Op::SegmentSum(a, seg) => {
                    let (r, c) = shapes[*a];
                    acc(*a, Tensor::from_fn(r, c, |i, j| g.get(seg[i], j)))?
                }
            }
        }
        Ok(Gradients { grads, shapes })
    }
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Tensor {
        self.tape.with_value(self.id, Tensor::clone)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.tape.with_value(self.id, Tensor::shape)
    }

    /// The single entry of a `1×1` value.
    pub fn item(&self) -> Result<f64> {
        self.tape.with_value(self.id, Tensor::item)
    }

    fn same_tape(&self, other: &Var<'_>) -> Result<()> {
        if std::ptr::eq(self.tape, other.tape) {
            Ok(())
        } else {
            Err(Error::Precondition(
                "operands recorded on different tapes".into(),
            ))
        }
    }

    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.same_tape(&other)?;
        self.tape.binary(
            self.id,
            other.id,
            Tensor::matmul,
            Op::MatMul(self.id, other.id),
        )
    }

    /// `self · otherᵀ`.
    pub fn matmul_t(self, other: Var<'t>) -> Result<Var<'t>> {
        self.same_tape(&other)?;
        self.tape.binary(
            self.id,
            other.id,
            Tensor::matmul_t,
            Op::MatMulT(self.id, other.id),
        )
    }

    pub fn transpose(self) -> Var<'t> {
        self.tape
            .unary(self.id, |x| Ok((x.transpose(), Op::Transpose(self.id))))
            .expect("transpose is infallible")
    }

    /// Sparse-dense product `a · self`.
    pub fn spmm(self, a: &Arc<SparseMatrix>) -> Result<Var<'t>> {
        self.tape.unary(self.id, |x| {
            Ok((a.spmm(x)?, Op::SpMM(Arc::clone(a), self.id)))
        })
    }

    pub fn relu(self) -> Var<'t> {
        self.tape
            .unary(self.id, |x| Ok((x.map(|v| v.max(0.0)), Op::Relu(self.id))))
            .expect("relu is infallible")
    }

    pub fn exp(self) -> Var<'t> {
        self.tape
            .unary(self.id, |x| Ok((x.map(f64::exp), Op::Exp(self.id))))
            .expect("exp is infallible")
    }

    /// Natural log; every entry must be strictly positive.
    pub fn log(self) -> Result<Var<'t>> {
        self.tape.unary(self.id, |x| {
            if let Some(bad) = x.as_slice().iter().find(|&&v| v <= 0.0 || v.is_nan()) {
                return Err(Error::Domain {
                    op: "log",
                    detail: format!("non-positive entry {bad}"),
                });
            }
            Ok((x.map(f64::ln), Op::Log(self.id)))
        })
    }

    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        self.same_tape(&other)?;
        self.tape
            .binary(self.id, other.id, Tensor::add, Op::Add(self.id, other.id))
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>> {
        self.same_tape(&other)?;
        self.tape
            .binary(self.id, other.id, Tensor::sub, Op::Sub(self.id, other.id))
    }

    pub fn hadamard(self, other: Var<'t>) -> Result<Var<'t>> {
        self.same_tape(&other)?;
        self.tape.binary(
            self.id,
            other.id,
            Tensor::hadamard,
            Op::Hadamard(self.id, other.id),
        )
    }

    pub fn scale(self, s: f64) -> Var<'t> {
        self.tape
            .unary(self.id, |x| Ok((x.scale(s), Op::Scale(self.id, s))))
            .expect("scale is infallible")
    }

    /// Multiplies by a `1×1` variable.
    pub fn mul_scalar(self, s: Var<'t>) -> Result<Var<'t>> {
        self.same_tape(&s)?;
        if s.shape() != (1, 1) {
            return Err(Error::shape(
                "mul_scalar",
                format!("scalar operand is {:?}", s.shape()),
            ));
        }
        self.tape.binary(
            s.id,
            self.id,
            |sv, x| Ok(x.scale(sv.as_slice()[0])),
            Op::ScalarMul(s.id, self.id),
        )
    }

    pub fn row_l2_normalize(self) -> Var<'t> {
        self.tape
            .unary(self.id, |x| {
                let norms: Vec<f64> = (0..x.rows())
                    .map(|i| {
                        x.row(i)
                            .iter()
                            .map(|v| v * v)
                            .sum::<f64>()
                            .sqrt()
                            .max(NORM_EPS)
                    })
                    .collect();
                Ok((x.row_l2_normalize(), Op::RowNormalize(self.id, norms)))
            })
            .expect("row_l2_normalize is infallible")
    }

    pub fn row_softmax(self) -> Var<'t> {
        self.tape
            .unary(self.id, |x| Ok((x.row_softmax(), Op::RowSoftmax(self.id))))
            .expect("row_softmax is infallible")
    }

    /// Weighted, max-stabilized row log-sum-exp: `log Σ_j w_ij exp(x_ij)`.
    ///
    /// `weights` must match the shape of `self` with non-negative entries;
    /// entries with zero weight are excluded. A row whose weights are all zero
    /// is a domain error.
    pub fn row_logsumexp(self, weights: &Arc<Tensor>) -> Result<Var<'t>> {
        self.tape.unary(self.id, |x| {
            if weights.shape() != x.shape() {
                return Err(Error::shape(
                    "row_logsumexp",
                    format!("weights {:?} vs {:?}", weights.shape(), x.shape()),
                ));
            }
            let mut out = Tensor::zeros(x.rows(), 1);
            let mut probs = Tensor::zeros(x.rows(), x.cols());
            for i in 0..x.rows() {
                let (xi, wi) = (x.row(i), weights.row(i));
                let m = xi
                    .iter()
                    .zip(wi)
                    .filter(|(_, &w)| w > 0.0)
                    .map(|(&v, _)| v)
                    .fold(f64::NEG_INFINITY, f64::max);
                if m == f64::NEG_INFINITY {
                    return Err(Error::Domain {
                        op: "row_logsumexp",
                        detail: format!("row {i} has no weighted entries"),
                    });
                }
                let pi = probs.row_mut(i);
                let mut s = 0.0;
                for ((p, &v), &w) in pi.iter_mut().zip(xi).zip(wi) {
                    if w > 0.0 {
                        *p = w * (v - m).exp();
                        s += *p;
                    }
                }
                pi.iter_mut().for_each(|p| *p /= s);
                out.set(i, 0, m + s.ln());
            }
            Ok((out, Op::RowLogSumExp(self.id, probs)))
        })
    }

    pub fn sum(self) -> Var<'t> {
        self.tape
            .unary(self.id, |x| Ok((Tensor::scalar(x.sum()), Op::Sum(self.id))))
            .expect("sum is infallible")
    }

    pub fn mean(self) -> Var<'t> {
        let n = self.tape.with_value(self.id, Tensor::len).max(1);
        self.sum().scale(1.0 / n as f64)
    }

    /// `n×k → n×1` row sums.
    pub fn row_sum(self) -> Var<'t> {
        self.tape
            .unary(self.id, |x| {
                let v = x.row_sums();
                Ok((Tensor::from_vec(v.len(), 1, v)?, Op::RowSum(self.id)))
            })
            .expect("row_sum is infallible")
    }

    pub fn concat_cols(self, other: Var<'t>) -> Result<Var<'t>> {
        self.same_tape(&other)?;
        self.tape.binary(
            self.id,
            other.id,
            Tensor::concat_cols,
            Op::ConcatCols(self.id, other.id),
        )
    }

    /// Gathers rows (repetition allowed).
    pub fn select_rows(self, idx: &[usize]) -> Result<Var<'t>> {
        let idx = Arc::new(idx.to_vec());
        self.tape.unary(self.id, |x| {
            Ok((x.select_rows(&idx)?, Op::SelectRows(self.id, idx.clone())))
        })
    }

    /// `diag(w) · self` for constant weights.
    pub fn scale_rows(self, w: &[f64]) -> Result<Var<'t>> {
        let w = Arc::new(w.to_vec());
        self.tape.unary(self.id, |x| {
            Ok((x.scale_rows(&w)?, Op::ScaleRows(self.id, w.clone())))
        })
    }

    /// Sums rows sharing a segment id: `out[s] = Σ_{i: seg[i]=s} self[i]`.
    pub fn segment_sum(self, seg: &Arc<Vec<usize>>, num_segments: usize) -> Result<Var<'t>> {
        self.tape.unary(self.id, |x| {
            if seg.len() != x.rows() {
                return Err(Error::shape(
                    "segment_sum",
                    format!("{} ids for {} rows", seg.len(), x.rows()),
                ));
            }
            let mut out = Tensor::zeros(num_segments, x.cols());
            for (i, &s) in seg.iter().enumerate() {
                if s >= num_segments {
                    return Err(Error::shape(
                        "segment_sum",
                        format!("segment {s} >= {num_segments}"),
                    ));
                }
                for (o, v) in out.row_mut(s).iter_mut().zip(x.row(i)) {
                    *o += v;
                }
            }
            Ok((out, Op::SegmentSum(self.id, Arc::clone(seg))))
        })
    }
}
