//! Reverse-mode automatic differentiation over dense `f64` matrices.
//!
//! A [`Tape`] records every operation in execution order. [`Var`] is a cheap
//! handle (tape reference plus node id). Calling [`Tape::backward`] on a 1x1
//! loss sweeps the tape in reverse and returns the gradient of every node that
//! depends on a `requires_grad` leaf. Sparse adjacency enters only as a
//! constant operand.

use std::cell::{Ref, RefCell};
use std::sync::Arc;

use ndarray::{Array2, Axis, Zip};

use crate::error::{shape_err, PanError, Result};
use crate::graph::CsrMatrix;

pub type Tensor = Array2<f64>;

const RSQRT_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    SpmmConst(Arc<CsrMatrix>, usize),
    Add(usize, usize),
    AddBroadcastRow(usize, usize),
    Scale(usize, usize),
    ScaleConst(usize, f64),
    Exp(usize),
    Tanh(usize),
    Relu(usize),
    Sqrt(usize),
    Mul(usize, usize),
    RowSum(usize),
    SumAll(usize),
    Rsqrt(usize),
    DiagScaleRows { v: usize, x: usize },
    DiagScaleCols { x: usize, v: usize },
    Diag(usize),
    GatherRows(usize, Vec<usize>),
    SegmentMean { x: usize, seg: Vec<usize>, counts: Vec<usize> },
    SegmentMax { x: usize, argmax: Array2<usize> },
    LogSoftmaxRows(usize),
    NllLoss(usize, Vec<usize>),
    MseLoss(usize, usize),
    ConcatRows(Vec<usize>),
    TopkMaskMul { x: usize, gate: usize, kept: Vec<usize> },
}

/// Names of the recorded operation kinds, for diagnostics.
impl Op {
    fn kind(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::SpmmConst(..) => "spmm_const_sparse",
            Op::Add(..) => "add",
            Op::AddBroadcastRow(..) => "add_broadcast_row",
            Op::Scale(..) => "scale",
            Op::ScaleConst(..) => "scale_const",
            Op::Exp(..) => "exp",
            Op::Tanh(..) => "tanh",
            Op::Relu(..) => "relu",
            Op::Sqrt(..) => "sqrt",
            Op::Mul(..) => "mul_elementwise",
            Op::RowSum(..) => "row_sum",
            Op::SumAll(..) => "sum_all",
            Op::Rsqrt(..) => "rsqrt_elementwise",
            Op::DiagScaleRows { .. } => "diag_scale_rows",
            Op::DiagScaleCols { .. } => "diag_scale_cols",
            Op::Diag(..) => "diag",
            Op::GatherRows(..) => "gather_rows",
            Op::SegmentMean { .. } => "segment_mean",
            Op::SegmentMax { .. } => "segment_max",
            Op::LogSoftmaxRows(..) => "log_softmax_rows",
            Op::NllLoss(..) => "nll_loss",
            Op::MseLoss(..) => "mse_loss",
            Op::ConcatRows(..) => "concat_rows",
            Op::TopkMaskMul { .. } => "topk_mask_mul",
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

#[derive(Default)]
struct TapeInner {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Operation record for one forward/backward pass.
#[derive(Default)]
pub struct Tape {
    inner: RefCell<TapeInner>,
}

#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let v = self.value();
        write!(f, "Var#{}[{}x{}]", self.id, v.nrows(), v.ncols())
    }
}

/// Gradients produced by one backward sweep, indexed by node id.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var<'_>) -> Option<&Tensor> {
        self.grads.get(var.id).and_then(|g| g.as_ref())
    }

    /// Gradient of `var`, or zeros of its shape if nothing flowed into it.
    pub fn get_or_zeros(&self, var: Var<'_>) -> Tensor {
        match self.get(var) {
            Some(g) => g.clone(),
            None => {
                let v = var.value();
                Tensor::zeros(v.raw_dim())
            }
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Trainable leaf.
    pub fn param(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, true)
    }

    /// Constant leaf; never receives a gradient.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, false)
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.constant(Tensor::from_elem((1, 1), value))
    }

    fn push(&self, value: Tensor, op: Op, needs_grad: bool) -> Var<'_> {
        let mut inner = self.inner.borrow_mut();
        inner.nodes.push(Node { value, op, needs_grad });
        Var {
            tape: self,
            id: inner.nodes.len() - 1,
        }
    }

    fn needs(&self, ids: &[usize]) -> bool {
        let inner = self.inner.borrow();
        ids.iter().any(|&i| inner.nodes[i].needs_grad)
    }

    fn record(&self, op: Op, value: Tensor, inputs: &[usize]) -> Var<'_> {
        let needs = self.needs(inputs);
        self.push(value, op, needs)
    }

    /// Reverse sweep from a scalar `loss`. A tape supports exactly one sweep.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        let mut inner = self.inner.borrow_mut();
        if inner.consumed {
            return Err(PanError::Autograd("tape already consumed by a backward pass".into()));
        }
        let shape = inner.nodes[loss.id].value.dim();
        if shape != (1, 1) {
            return Err(PanError::Autograd(format!("loss must be 1x1, got {}x{}", shape.0, shape.1)));
        }
        inner.consumed = true;
        let nodes = &inner.nodes;
        let mut grads: Vec<Option<Tensor>> = vec![None; nodes.len()];
        grads[loss.id] = Some(Tensor::ones((1, 1)));

        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if !node.needs_grad {
                continue;
            }
            backprop_node(nodes, id, &g, &mut grads);
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(grads: &mut [Option<Tensor>], nodes: &[Node], id: usize, contrib: Tensor) {
    if !nodes[id].needs_grad {
        return;
    }
    match &mut grads[id] {
        Some(existing) => *existing += &contrib,
        slot @ None => *slot = Some(contrib),
    }
}

fn backprop_node(nodes: &[Node], id: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
    let out = &nodes[id].value;
    let val = |i: usize| &nodes[i].value;
    match &nodes[id].op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            if nodes[*a].needs_grad {
                accumulate(grads, nodes, *a, g.dot(&val(*b).t()));
            }
            if nodes[*b].needs_grad {
                accumulate(grads, nodes, *b, val(*a).t().dot(g));
            }
        }
        Op::SpmmConst(a, x) => {
            let mut gx = Tensor::zeros(val(*x).raw_dim());
            for r in 0..a.num_rows() {
                let grow = g.row(r);
                for (c, v) in a.row(r) {
                    gx.row_mut(c).scaled_add(v, &grow);
                }
            }
            accumulate(grads, nodes, *x, gx);
        }
        Op::Add(a, b) => {
            accumulate(grads, nodes, *a, g.clone());
            accumulate(grads, nodes, *b, g.clone());
        }
        Op::AddBroadcastRow(x, b) => {
            accumulate(grads, nodes, *x, g.clone());
            if nodes[*b].needs_grad {
                accumulate(grads, nodes, *b, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
            }
        }
        Op::Scale(x, s) => {
            let sv = val(*s)[[0, 0]];
            if nodes[*x].needs_grad {
                accumulate(grads, nodes, *x, g * sv);
            }
            if nodes[*s].needs_grad {
                let gs = (g * val(*x)).sum();
                accumulate(grads, nodes, *s, Tensor::from_elem((1, 1), gs));
            }
        }
        Op::ScaleConst(x, c) => accumulate(grads, nodes, *x, g * *c),
        Op::Exp(x) => accumulate(grads, nodes, *x, g * out),
        Op::Tanh(x) => {
            let d = Zip::from(g).and(out).map_collect(|&g, &y| g * (1.0 - y * y));
            accumulate(grads, nodes, *x, d);
        }
        Op::Relu(x) => {
            let d = Zip::from(g).and(val(*x)).map_collect(|&g, &v| if v > 0.0 { g } else { 0.0 });
            accumulate(grads, nodes, *x, d);
        }
        Op::Sqrt(x) => {
            let d = Zip::from(g).and(out).map_collect(|&g, &y| if y > 0.0 { 0.5 * g / y } else { 0.0 });
            accumulate(grads, nodes, *x, d);
        }
        Op::Mul(a, b) => {
            if nodes[*a].needs_grad {
                accumulate(grads, nodes, *a, g * val(*b));
            }
            if nodes[*b].needs_grad {
                accumulate(grads, nodes, *b, g * val(*a));
            }
        }
        Op::RowSum(x) => {
            let shape = val(*x).raw_dim();
            let gcol = g.column(0);
            let d = Tensor::from_shape_fn(shape, |(i, _)| gcol[i]);
            accumulate(grads, nodes, *x, d);
        }
        Op::SumAll(x) => {
            let d = Tensor::from_elem(val(*x).raw_dim(), g[[0, 0]]);
            accumulate(grads, nodes, *x, d);
        }
        Op::Rsqrt(x) => {
            let d = Zip::from(g)
                .and(val(*x))
                .and(out)
                .map_collect(|&g, &v, &y| if v > RSQRT_FLOOR { -0.5 * g * y * y * y } else { 0.0 });
            accumulate(grads, nodes, *x, d);
        }
        Op::DiagScaleRows { v, x } => {
            let vv = val(*v).column(0);
            let xv = val(*x);
            if nodes[*x].needs_grad {
                let mut d = g.clone();
                for (i, mut row) in d.rows_mut().into_iter().enumerate() {
                    row *= vv[i];
                }
                accumulate(grads, nodes, *x, d);
            }
            if nodes[*v].needs_grad {
                let s = (g * xv).sum_axis(Axis(1)).insert_axis(Axis(1));
                accumulate(grads, nodes, *v, s);
            }
        }
        Op::DiagScaleCols { x, v } => {
            let vv = val(*v).column(0);
            let xv = val(*x);
            if nodes[*x].needs_grad {
                let mut d = g.clone();
                for mut row in d.rows_mut() {
                    row *= &vv;
                }
                accumulate(grads, nodes, *x, d);
            }
            if nodes[*v].needs_grad {
                let s = (g * xv).sum_axis(Axis(0)).insert_axis(Axis(1));
                accumulate(grads, nodes, *v, s);
            }
        }
        Op::Diag(x) => {
            let n = g.nrows();
            let mut d = Tensor::zeros((n, n));
            for i in 0..n {
                d[[i, i]] = g[[i, 0]];
            }
            accumulate(grads, nodes, *x, d);
        }
        Op::GatherRows(x, idx) => {
            let mut d = Tensor::zeros(val(*x).raw_dim());
            for (k, &i) in idx.iter().enumerate() {
                d.row_mut(i).scaled_add(1.0, &g.row(k));
            }
            accumulate(grads, nodes, *x, d);
        }
        Op::SegmentMean { x, seg, counts } => {
            let mut d = Tensor::zeros(val(*x).raw_dim());
            for (i, &s) in seg.iter().enumerate() {
                d.row_mut(i).scaled_add(1.0 / counts[s] as f64, &g.row(s));
            }
            accumulate(grads, nodes, *x, d);
        }
        Op::SegmentMax { x, argmax } => {
            let mut d = Tensor::zeros(val(*x).raw_dim());
            for ((s, c), &i) in argmax.indexed_iter() {
                d[[i, c]] += g[[s, c]];
            }
            accumulate(grads, nodes, *x, d);
        }
        Op::LogSoftmaxRows(x) => {
            let mut d = g.clone();
            for (mut drow, orow) in d.rows_mut().into_iter().zip(out.rows()) {
                let total: f64 = drow.sum();
                Zip::from(&mut drow).and(&orow).for_each(|dv, &lp| *dv -= lp.exp() * total);
            }
            accumulate(grads, nodes, *x, d);
        }
        Op::NllLoss(x, labels) => {
            let mut d = Tensor::zeros(val(*x).raw_dim());
            let scale = g[[0, 0]] / labels.len() as f64;
            for (i, &l) in labels.iter().enumerate() {
                d[[i, l]] = -scale;
            }
            accumulate(grads, nodes, *x, d);
        }
        Op::MseLoss(p, t) => {
            let n = val(*p).len() as f64;
            let d = (val(*p) - val(*t)) * (2.0 * g[[0, 0]] / n);
            if nodes[*t].needs_grad {
                accumulate(grads, nodes, *t, -&d);
            }
            accumulate(grads, nodes, *p, d);
        }
        Op::ConcatRows(ids) => {
            let mut start = 0;
            for &i in ids {
                let rows = val(i).nrows();
                accumulate(grads, nodes, i, g.slice(ndarray::s![start..start + rows, ..]).to_owned());
                start += rows;
            }
        }
        Op::TopkMaskMul { x, gate, kept } => {
            let xv = val(*x);
            let gv = val(*gate);
            if nodes[*x].needs_grad {
                let mut d = Tensor::zeros(xv.raw_dim());
                for (k, &i) in kept.iter().enumerate() {
                    d.row_mut(i).scaled_add(gv[[i, 0]], &g.row(k));
                }
                accumulate(grads, nodes, *x, d);
            }
            if nodes[*gate].needs_grad {
                let mut d = Tensor::zeros(gv.raw_dim());
                for (k, &i) in kept.iter().enumerate() {
                    d[[i, 0]] = g.row(k).dot(&xv.row(i));
                }
                accumulate(grads, nodes, *gate, d);
            }
        }
    }
}

fn check_same(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(shape_err(op, format!("{:?}", a.dim()), format!("{:?}", b.dim())));
    }
    Ok(())
}

fn check_column(op: &'static str, v: &Tensor, n: usize) -> Result<()> {
    if v.dim() != (n, 1) {
        return Err(shape_err(op, format!("({n}, 1)"), format!("{:?}", v.dim())));
    }
    Ok(())
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Ref<'t, Tensor> {
        Ref::map(self.tape.inner.borrow(), |t| &t.nodes[self.id].value)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value().dim()
    }

    pub fn op_kind(&self) -> &'static str {
        self.tape.inner.borrow().nodes[self.id].op.kind()
    }

    /// Value of a 1x1 variable.
    pub fn item(&self) -> f64 {
        self.value()[[0, 0]]
    }

    fn unary(self, op: Op, f: impl Fn(&Tensor) -> Tensor) -> Var<'t> {
        let out = f(&self.value());
        self.tape.record(op, out, &[self.id])
    }

    pub fn matmul(self, rhs: Var<'t>) -> Result<Var<'t>> {
        let out = {
            let (a, b) = (self.value(), rhs.value());
            if a.ncols() != b.nrows() {
                return Err(shape_err("matmul", format!("{} rows", a.ncols()), format!("{} rows", b.nrows())));
            }
            a.dot(&*b)
        };
        Ok(self.tape.record(Op::MatMul(self.id, rhs.id), out, &[self.id, rhs.id]))
    }

    /// `a * self` with a constant sparse `a`.
    pub fn spmm_const(self, a: Arc<CsrMatrix>) -> Result<Var<'t>> {
        let out = crate::graph::spmm(&a, &self.value())?;
        Ok(self.tape.record(Op::SpmmConst(a, self.id), out, &[self.id]))
    }

    pub fn add(self, rhs: Var<'t>) -> Result<Var<'t>> {
        let out = {
            let (a, b) = (self.value(), rhs.value());
            check_same("add", &a, &b)?;
            &*a + &*b
        };
        Ok(self.tape.record(Op::Add(self.id, rhs.id), out, &[self.id, rhs.id]))
    }

    /// Adds a `1 x d` row vector to every row.
    pub fn add_broadcast_row(self, bias: Var<'t>) -> Result<Var<'t>> {
        let out = {
            let (a, b) = (self.value(), bias.value());
            if b.dim() != (1, a.ncols()) {
                return Err(shape_err("add_broadcast_row", format!("(1, {})", a.ncols()), format!("{:?}", b.dim())));
            }
            &*a + &*b
        };
        Ok(self.tape.record(Op::AddBroadcastRow(self.id, bias.id), out, &[self.id, bias.id]))
    }

    /// Multiplies by a 1x1 variable.
    pub fn scale(self, s: Var<'t>) -> Result<Var<'t>> {
        let out = {
            let sv = s.value();
            if sv.dim() != (1, 1) {
                return Err(shape_err("scale", "(1, 1)", format!("{:?}", sv.dim())));
            }
            &*self.value() * sv[[0, 0]]
        };
        Ok(self.tape.record(Op::Scale(self.id, s.id), out, &[self.id, s.id]))
    }

    pub fn scale_const(self, c: f64) -> Var<'t> {
        self.unary(Op::ScaleConst(self.id, c), |x| x * c)
    }

    pub fn exp(self) -> Var<'t> {
        self.unary(Op::Exp(self.id), |x| x.mapv(f64::exp))
    }

    pub fn tanh(self) -> Var<'t> {
        self.unary(Op::Tanh(self.id), |x| x.mapv(f64::tanh))
    }

    pub fn relu(self) -> Var<'t> {
        self.unary(Op::Relu(self.id), |x| x.mapv(|v| v.max(0.0)))
    }

    pub fn sqrt(self) -> Var<'t> {
        self.unary(Op::Sqrt(self.id), |x| x.mapv(|v| v.max(0.0).sqrt()))
    }

    /// `max(x, 1e-30)^(-1/2)`.
    pub fn rsqrt(self) -> Var<'t> {
        self.unary(Op::Rsqrt(self.id), |x| x.mapv(|v| 1.0 / v.max(RSQRT_FLOOR).sqrt()))
    }

    pub fn mul(self, rhs: Var<'t>) -> Result<Var<'t>> {
        let out = {
            let (a, b) = (self.value(), rhs.value());
            check_same("mul_elementwise", &a, &b)?;
            &*a * &*b
        };
        Ok(self.tape.record(Op::Mul(self.id, rhs.id), out, &[self.id, rhs.id]))
    }

    /// `N x d -> N x 1`.
    pub fn row_sum(self) -> Var<'t> {
        self.unary(Op::RowSum(self.id), |x| x.sum_axis(Axis(1)).insert_axis(Axis(1)))
    }

    pub fn sum_all(self) -> Var<'t> {
        self.unary(Op::SumAll(self.id), |x| Tensor::from_elem((1, 1), x.sum()))
    }

    /// `diag(v) * self` for an `N x 1` column `v`.
    pub fn diag_scale_rows(self, v: Var<'t>) -> Result<Var<'t>> {
        let out = {
            let (x, vv) = (self.value(), v.value());
            check_column("diag_scale_rows", &vv, x.nrows())?;
            &*x * &*vv
        };
        Ok(self.tape.record(Op::DiagScaleRows { v: v.id, x: self.id }, out, &[v.id, self.id]))
    }

    /// `self * diag(v)` for an `N x 1` column `v`.
    pub fn diag_scale_cols(self, v: Var<'t>) -> Result<Var<'t>> {
        let out = {
            let (x, vv) = (self.value(), v.value());
            check_column("diag_scale_cols", &vv, x.ncols())?;
            &*x * &vv.t()
        };
        Ok(self.tape.record(Op::DiagScaleCols { x: self.id, v: v.id }, out, &[self.id, v.id]))
    }

    /// Diagonal of a square matrix as an `N x 1` column.
    pub fn diag(self) -> Result<Var<'t>> {
        let out = {
            let x = self.value();
            if x.nrows() != x.ncols() {
                return Err(shape_err("diag", "square", format!("{:?}", x.dim())));
            }
            x.diag().to_owned().insert_axis(Axis(1))
        };
        Ok(self.tape.record(Op::Diag(self.id), out, &[self.id]))
    }

    pub fn gather_rows(self, idx: &[usize]) -> Result<Var<'t>> {
        let out = {
            let x = self.value();
            if let Some(&bad) = idx.iter().find(|&&i| i >= x.nrows()) {
                return Err(PanError::IndexOutOfRange { index: bad, num_nodes: x.nrows() });
            }
            x.select(Axis(0), idx)
        };
        Ok(self.tape.record(Op::GatherRows(self.id, idx.to_vec()), out, &[self.id]))
    }

    /// Per-segment mean of rows. `seg[i]` is the segment of row `i`.
    pub fn segment_mean(self, seg: &[usize], num_segments: usize) -> Result<Var<'t>> {
        let (out, counts) = {
            let x = self.value();
            let counts = segment_counts(seg, x.nrows(), num_segments)?;
            let mut out = Tensor::zeros((num_segments, x.ncols()));
            for (i, &s) in seg.iter().enumerate() {
                out.row_mut(s).scaled_add(1.0 / counts[s] as f64, &x.row(i));
            }
            (out, counts)
        };
        let op = Op::SegmentMean {
            x: self.id,
            seg: seg.to_vec(),
            counts,
        };
        Ok(self.tape.record(op, out, &[self.id]))
    }

    /// Per-segment column-wise max. Ties go to the earliest row.
    pub fn segment_max(self, seg: &[usize], num_segments: usize) -> Result<Var<'t>> {
        let (out, argmax) = {
            let x = self.value();
            segment_counts(seg, x.nrows(), num_segments)?;
            let d = x.ncols();
            let mut out = Tensor::from_elem((num_segments, d), f64::NEG_INFINITY);
            let mut argmax = Array2::<usize>::zeros((num_segments, d));
            for (i, &s) in seg.iter().enumerate() {
                for c in 0..d {
                    if x[[i, c]] > out[[s, c]] {
                        out[[s, c]] = x[[i, c]];
                        argmax[[s, c]] = i;
                    }
                }
            }
            (out, argmax)
        };
        Ok(self.tape.record(Op::SegmentMax { x: self.id, argmax }, out, &[self.id]))
    }

    pub fn log_softmax_rows(self) -> Var<'t> {
        self.unary(Op::LogSoftmaxRows(self.id), |x| {
            let mut out = x.clone();
            for mut row in out.rows_mut() {
                let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
                row -= lse;
            }
            out
        })
    }

    /// Mean negative log-likelihood of `labels` under row log-probabilities.
    pub fn nll_loss(self, labels: &[usize]) -> Result<Var<'t>> {
        let out = {
            let x = self.value();
            if labels.len() != x.nrows() {
                return Err(shape_err("nll_loss", x.nrows(), labels.len()));
            }
            let mut total = 0.0;
            for (i, &l) in labels.iter().enumerate() {
                if l >= x.ncols() {
                    return Err(PanError::InvalidArgument(format!("label {l} out of range for {} classes", x.ncols())));
                }
                total -= x[[i, l]];
            }
            Tensor::from_elem((1, 1), total / labels.len().max(1) as f64)
        };
        Ok(self.tape.record(Op::NllLoss(self.id, labels.to_vec()), out, &[self.id]))
    }

    pub fn mse_loss(self, target: Var<'t>) -> Result<Var<'t>> {
        let out = {
            let (p, t) = (self.value(), target.value());
            check_same("mse_loss", &p, &t)?;
            let n = p.len().max(1) as f64;
            Tensor::from_elem((1, 1), (&*p - &*t).mapv(|r| r * r).sum() / n)
        };
        Ok(self.tape.record(Op::MseLoss(self.id, target.id), out, &[self.id, target.id]))
    }

    /// Rows of `x[kept]` scaled by the matching entries of the `N x 1` `gate`.
    pub fn topk_mask_mul(self, gate: Var<'t>, kept: &[usize]) -> Result<Var<'t>> {
        let out = {
            let (x, gv) = (self.value(), gate.value());
            check_column("topk_mask_mul", &gv, x.nrows())?;
            if let Some(&bad) = kept.iter().find(|&&i| i >= x.nrows()) {
                return Err(PanError::IndexOutOfRange { index: bad, num_nodes: x.nrows() });
            }
            let mut out = x.select(Axis(0), kept);
            for (k, &i) in kept.iter().enumerate() {
                out.row_mut(k).mapv_inplace(|v| v * gv[[i, 0]]);
            }
            out
        };
        let op = Op::TopkMaskMul {
            x: self.id,
            gate: gate.id,
            kept: kept.to_vec(),
        };
        Ok(self.tape.record(op, out, &[self.id, gate.id]))
    }
}

pub fn concat_rows<'t>(parts: &[Var<'t>]) -> Result<Var<'t>> {
    let first = parts
        .first()
        .ok_or_else(|| PanError::InvalidArgument("concat_rows of nothing".into()))?;
    let out = {
        let views: Vec<Ref<'_, Tensor>> = parts.iter().map(|p| p.value()).collect();
        let d = views[0].ncols();
        if let Some(bad) = views.iter().find(|v| v.ncols() != d) {
            return Err(shape_err("concat_rows", format!("{d} columns"), bad.ncols()));
        }
        let plain: Vec<_> = views.iter().map(|v| v.view()).collect();
        ndarray::concatenate(Axis(0), &plain).expect("column counts checked")
    };
    let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
    Ok(first.tape.record(Op::ConcatRows(ids.clone()), out, &ids))
}

fn segment_counts(seg: &[usize], rows: usize, num_segments: usize) -> Result<Vec<usize>> {
    if seg.len() != rows {
        return Err(shape_err("segment", rows, seg.len()));
    }
    let mut counts = vec![0usize; num_segments];
    for &s in seg {
        if s >= num_segments {
            return Err(PanError::IndexOutOfRange {
                index: s,
                num_nodes: num_segments,
            });
        }
        counts[s] += 1;
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(PanError::InvalidArgument(format!("segment {empty} is empty")));
    }
    Ok(counts)
}

/// Per-parameter outcome of a finite-difference check.
#[derive(Debug, Clone)]
pub struct GradCheck {
    /// Max over coordinates of `|g_ad - g_fd| / max(1, |g_fd|)`, one per parameter.
    pub per_param: Vec<f64>,
}

impl GradCheck {
    pub fn max_error(&self) -> f64 {
        self.per_param.iter().copied().fold(0.0, f64::max)
    }
}

/// Compares tape gradients of `f` against central differences with step `eps`.
///
/// `f` receives a fresh tape and one leaf per parameter and must return a 1x1 loss.
pub fn finite_diff_check<F>(f: F, params: &[Tensor], eps: f64) -> Result<GradCheck>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    if !(eps > 0.0) {
        return Err(PanError::InvalidArgument("eps must be positive".into()));
    }
    let eval = |ps: &[Tensor]| -> Result<f64> {
        let tape = Tape::new();
        let leaves: Vec<_> = ps.iter().map(|p| tape.constant(p.clone())).collect();
        let v = f(&tape, &leaves)?.item();
        if !v.is_finite() {
            return Err(PanError::NonFinite("objective".into()));
        }
        Ok(v)
    };

    let analytic: Vec<Tensor> = {
        let tape = Tape::new();
        let leaves: Vec<_> = params.iter().map(|p| tape.param(p.clone())).collect();
        let loss = f(&tape, &leaves)?;
        if !loss.item().is_finite() {
            return Err(PanError::NonFinite("objective".into()));
        }
        let grads = tape.backward(loss)?;
        leaves.iter().map(|&l| grads.get_or_zeros(l)).collect()
    };

    let mut work: Vec<Tensor> = params.to_vec();
    let mut per_param = Vec::with_capacity(params.len());
    for (pi, ga) in analytic.iter().enumerate() {
        let mut worst = 0.0f64;
        for flat in 0..params[pi].len() {
            let idx = (flat / params[pi].ncols(), flat % params[pi].ncols());
            let orig = params[pi][idx];
            work[pi][idx] = orig + eps;
            let up = eval(&work)?;
            work[pi][idx] = orig - eps;
            let down = eval(&work)?;
            work[pi][idx] = orig;
            let fd = (up - down) / (2.0 * eps);
            let err = (ga[idx] - fd).abs() / fd.abs().max(1.0);
            worst = worst.max(err);
        }
        per_param.push(worst);
    }
    Ok(GradCheck { per_param })
}
