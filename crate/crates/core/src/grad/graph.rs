use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Differentiable operations.
///
/// Reductions and softmax keep the reduced axis with length one, so a
/// `[n, d]` input reduced over axis 0 yields `[1, d]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OpKind {
    Add,
    Sub,
    /// Elementwise product.
    Mul,
    /// Elementwise quotient.
    Div,
    MatMul,
    Relu,
    Softplus,
    Exp,
    Log,
    Square,
    Scale(f64),
    AddScalar(f64),
    MeanOverAxis(usize),
    SumOverAxis(usize),
    SoftmaxOverAxis(usize),
    Concat(usize),
    /// `[m, n] + [1, n]` (or `[n]`), adding the row to every row.
    BroadcastAddRow,
    Transpose,
    SliceCols { start: usize, len: usize },
    /// `[1, n]` repeated into `[m, n]`.
    RepeatRows(usize),
}

impl OpKind {
    pub fn name(&self) -> &'static str {
        match self {
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Mul => "mul",
            OpKind::Div => "div",
            OpKind::MatMul => "matmul",
            OpKind::Relu => "relu",
            OpKind::Softplus => "softplus",
            OpKind::Exp => "exp",
            OpKind::Log => "log",
            OpKind::Square => "square",
            OpKind::Scale(_) => "scale",
            OpKind::AddScalar(_) => "add_scalar",
            OpKind::MeanOverAxis(_) => "mean_over_axis",
            OpKind::SumOverAxis(_) => "sum_over_axis",
            OpKind::SoftmaxOverAxis(_) => "softmax_over_axis",
            OpKind::Concat(_) => "concat",
            OpKind::BroadcastAddRow => "broadcast_add_row",
            OpKind::Transpose => "transpose",
            OpKind::SliceCols { .. } => "slice_cols",
            OpKind::RepeatRows(_) => "repeat_rows",
        }
    }

    fn arity(&self) -> Option<usize> {
        match self {
            OpKind::Add
            | OpKind::Sub
            | OpKind::Mul
            | OpKind::Div
            | OpKind::MatMul
            | OpKind::BroadcastAddRow => Some(2),
            OpKind::Concat(_) => None,
            _ => Some(1),
        }
    }
}

struct Node {
    value: Tensor,
    requires_grad: bool,
    /// Present only when some input requires a gradient.
    op: Option<(OpKind, Vec<Var>)>,
}

/// Tape of executed operations.
///
/// Nodes are appended in execution order, so the tape is always
/// topologically sorted. A graph is meant to live for one forward pass;
/// gradients accumulate across repeated [`Graph::backward`] calls until
/// [`Graph::zero_grad`].
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Registers a leaf value.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, requires_grad, None)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    /// Accumulated gradient of `var`, if any backward pass reached it.
    pub fn grad(&self, var: Var) -> Option<Tensor> {
        self.grads[var.0]
            .as_ref()
            .map(|g| Tensor::from_parts(self.nodes[var.0].value.shape().to_vec(), g.clone()))
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
    }

    fn push(&mut self, value: Tensor, requires_grad: bool, op: Option<(OpKind, Vec<Var>)>) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad,
            op,
        });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    /// Evaluates `kind` on `inputs` and records it.
    pub fn apply(&mut self, kind: OpKind, inputs: &[Var]) -> Result<Var> {
        if let Some(arity) = kind.arity() {
            if inputs.len() != arity {
                return Err(Error::Shape {
                    op: kind.name(),
                    lhs: vec![arity],
                    rhs: vec![inputs.len()],
                });
            }
        } else if inputs.is_empty() {
            return Err(Error::Shape {
                op: kind.name(),
                lhs: vec![1],
                rhs: vec![0],
            });
        }
        let values: Vec<&Tensor> = inputs.iter().map(|v| &self.nodes[v.0].value).collect();
        let out = forward(kind, &values)?;
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        let op = requires_grad.then(|| (kind, inputs.to_vec()));
        Ok(self.push(out, requires_grad, op))
    }

    /// Back-propagates from a one-element `loss`, adding into the stored
    /// gradient of every reachable node that requires one.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let loss_node = &self.nodes[loss.0];
        if loss_node.value.numel() != 1 {
            return Err(Error::Shape {
                op: "backward",
                lhs: loss_node.value.shape().to_vec(),
                rhs: vec![1],
            });
        }
        if !loss_node.requires_grad {
            return Ok(());
        }
        let mut local: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        local[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let Some(upstream) = local[idx].take() else {
                continue;
            };
            if let Some((kind, inputs)) = &self.nodes[idx].op {
                let values: Vec<&Tensor> =
                    inputs.iter().map(|v| &self.nodes[v.0].value).collect();
                let input_grads =
                    backward_op(*kind, &values, &self.nodes[idx].value, &upstream);
                for (input, g) in inputs.iter().zip(input_grads) {
                    if !self.nodes[input.0].requires_grad {
                        continue;
                    }
                    accumulate(&mut local[input.0], g);
                }
            }
            accumulate(&mut self.grads[idx], upstream);
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::Add, &[a, b])
    }
    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::Sub, &[a, b])
    }
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::Mul, &[a, b])
    }
    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::Div, &[a, b])
    }
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::MatMul, &[a, b])
    }
    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::Relu, &[a])
    }
    pub fn softplus(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::Softplus, &[a])
    }
    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::Exp, &[a])
    }
    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::Log, &[a])
    }
    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::Square, &[a])
    }
    pub fn scale(&mut self, a: Var, k: f64) -> Result<Var> {
        self.apply(OpKind::Scale(k), &[a])
    }
    pub fn add_scalar(&mut self, a: Var, k: f64) -> Result<Var> {
        self.apply(OpKind::AddScalar(k), &[a])
    }
    pub fn mean_over_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        self.apply(OpKind::MeanOverAxis(axis), &[a])
    }
    pub fn sum_over_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        self.apply(OpKind::SumOverAxis(axis), &[a])
    }
    pub fn softmax_over_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        self.apply(OpKind::SoftmaxOverAxis(axis), &[a])
    }
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        self.apply(OpKind::Concat(axis), parts)
    }
    pub fn broadcast_add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.apply(OpKind::BroadcastAddRow, &[a, row])
    }
    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::Transpose, &[a])
    }
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        self.apply(OpKind::SliceCols { start, len }, &[a])
    }
    pub fn repeat_rows(&mut self, a: Var, rows: usize) -> Result<Var> {
        self.apply(OpKind::RepeatRows(rows), &[a])
    }

    /// Mean of all entries, as a one-element tensor.
    pub fn mean_all(&mut self, a: Var) -> Result<Var> {
        let mut cur = a;
        for axis in (0..self.value(a).rank()).rev() {
            cur = self.mean_over_axis(cur, axis)?;
        }
        Ok(cur)
    }

    /// Sum of all entries, as a one-element tensor.
    pub fn sum_all(&mut self, a: Var) -> Result<Var> {
        let mut cur = a;
        for axis in (0..self.value(a).rank()).rev() {
            cur = self.sum_over_axis(cur, axis)?;
        }
        Ok(cur)
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, g: Vec<f64>) {
    match slot {
        Some(existing) => existing.iter_mut().zip(&g).for_each(|(e, v)| *e += v),
        None => *slot = Some(g),
    }
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}

/// Views `shape` as `(outer, axis_len, inner)` around `axis`.
fn axis_split(shape: &[usize], axis: usize) -> Option<(usize, usize, usize)> {
    if axis >= shape.len() {
        return None;
    }
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    Some((outer, shape[axis], inner))
}

fn require_matrix(op: &'static str, t: &Tensor) -> Result<(usize, usize)> {
    if t.rank() != 2 {
        return Err(Error::Shape {
            op,
            lhs: t.shape().to_vec(),
            rhs: vec![],
        });
    }
    Ok((t.shape()[0], t.shape()[1]))
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
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

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::from_parts(t.shape().to_vec(), t.data().iter().map(|&x| f(x)).collect())
}

fn zip(op: &'static str, a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return Err(shape_err(op, a, b));
    }
    Ok(Tensor::from_parts(
        a.shape().to_vec(),
        a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect(),
    ))
}

pub(crate) fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
    out
}

fn transpose_raw(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = a[r * cols + c];
        }
    }
    out
}

fn reduced_shape(shape: &[usize], axis: usize) -> Vec<usize> {
    let mut s = shape.to_vec();
    s[axis] = 1;
    s
}

fn forward(kind: OpKind, x: &[&Tensor]) -> Result<Tensor> {
    let name = kind.name();
    match kind {
        OpKind::Add => zip(name, x[0], x[1], |a, b| a + b),
        OpKind::Sub => zip(name, x[0], x[1], |a, b| a - b),
        OpKind::Mul => zip(name, x[0], x[1], |a, b| a * b),
        OpKind::Div => zip(name, x[0], x[1], |a, b| a / b),
        OpKind::MatMul => {
            let (m, k) = require_matrix(name, x[0])?;
            let (k2, n) = require_matrix(name, x[1])?;
            if k != k2 {
                return Err(shape_err(name, x[0], x[1]));
            }
            Ok(Tensor::from_parts(
                vec![m, n],
                matmul_raw(x[0].data(), x[1].data(), m, k, n),
            ))
        }
        OpKind::Relu => Ok(map(x[0], |v| if v > 0.0 { v } else { 0.0 })),
        OpKind::Softplus => Ok(map(x[0], softplus)),
        OpKind::Exp => Ok(map(x[0], f64::exp)),
        OpKind::Log => Ok(map(x[0], f64::ln)),
        OpKind::Square => Ok(map(x[0], |v| v * v)),
        OpKind::Scale(k) => Ok(map(x[0], |v| v * k)),
        OpKind::AddScalar(k) => Ok(map(x[0], |v| v + k)),
        OpKind::SumOverAxis(axis) | OpKind::MeanOverAxis(axis) => {
            let (outer, len, inner) = axis_split(x[0].shape(), axis).ok_or_else(|| Error::Shape {
                op: name,
                lhs: x[0].shape().to_vec(),
                rhs: vec![axis],
            })?;
            let div = if matches!(kind, OpKind::MeanOverAxis(_)) {
                len as f64
            } else {
                1.0
            };
            let d = x[0].data();
            let mut out = vec![0.0; outer * inner];
            for o in 0..outer {
                for a in 0..len {
                    let base = (o * len + a) * inner;
                    for i in 0..inner {
                        out[o * inner + i] += d[base + i];
                    }
                }
            }
            if div != 1.0 {
                out.iter_mut().for_each(|v| *v /= div);
            }
            Ok(Tensor::from_parts(reduced_shape(x[0].shape(), axis), out))
        }
        OpKind::SoftmaxOverAxis(axis) => {
            let (outer, len, inner) = axis_split(x[0].shape(), axis).ok_or_else(|| Error::Shape {
                op: name,
                lhs: x[0].shape().to_vec(),
                rhs: vec![axis],
            })?;
            let d = x[0].data();
            let mut out = vec![0.0; d.len()];
            for o in 0..outer {
                for i in 0..inner {
                    let idx = |a: usize| (o * len + a) * inner + i;
                    let max = (0..len).map(|a| d[idx(a)]).fold(f64::NEG_INFINITY, f64::max);
                    let mut total = 0.0;
                    for a in 0..len {
                        let e = (d[idx(a)] - max).exp();
                        out[idx(a)] = e;
                        total += e;
                    }
                    for a in 0..len {
                        out[idx(a)] /= total;
                    }
                }
            }
            Ok(Tensor::from_parts(x[0].shape().to_vec(), out))
        }
        OpKind::Concat(axis) => {
            let first = x[0];
            let rank = first.rank();
            if axis >= rank {
                return Err(Error::Shape {
                    op: name,
                    lhs: first.shape().to_vec(),
                    rhs: vec![axis],
                });
            }
            for t in &x[1..] {
                let compatible = t.rank() == rank
                    && t.shape()
                        .iter()
                        .zip(first.shape())
                        .enumerate()
                        .all(|(d, (a, b))| d == axis || a == b);
                if !compatible {
                    return Err(shape_err(name, first, t));
                }
            }
            let outer: usize = first.shape()[..axis].iter().product();
            let inner: usize = first.shape()[axis + 1..].iter().product();
            let total_axis: usize = x.iter().map(|t| t.shape()[axis]).sum();
            let mut out = Vec::with_capacity(outer * total_axis * inner);
            for o in 0..outer {
                for t in x {
                    let chunk = t.shape()[axis] * inner;
                    out.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
                }
            }
            let mut shape = first.shape().to_vec();
            shape[axis] = total_axis;
            Ok(Tensor::from_parts(shape, out))
        }
        OpKind::BroadcastAddRow => {
            let (m, n) = require_matrix(name, x[0])?;
            if x[1].numel() != n || (x[1].rank() == 2 && x[1].shape()[0] != 1) {
                return Err(shape_err(name, x[0], x[1]));
            }
            let row = x[1].data();
            let mut out = x[0].data().to_vec();
            for r in 0..m {
                for (o, &b) in out[r * n..(r + 1) * n].iter_mut().zip(row) {
                    *o += b;
                }
            }
            Ok(Tensor::from_parts(vec![m, n], out))
        }
        OpKind::Transpose => {
            let (m, n) = require_matrix(name, x[0])?;
            Ok(Tensor::from_parts(vec![n, m], transpose_raw(x[0].data(), m, n)))
        }
        OpKind::SliceCols { start, len } => {
            let (m, n) = require_matrix(name, x[0])?;
            if len == 0 || start + len > n {
                return Err(Error::Shape {
                    op: name,
                    lhs: vec![m, n],
                    rhs: vec![start, len],
                });
            }
            let d = x[0].data();
            let mut out = Vec::with_capacity(m * len);
            for r in 0..m {
                out.extend_from_slice(&d[r * n + start..r * n + start + len]);
            }
            Ok(Tensor::from_parts(vec![m, len], out))
        }
        OpKind::RepeatRows(rows) => {
            let (m, n) = require_matrix(name, x[0])?;
            if m != 1 || rows == 0 {
                return Err(Error::Shape {
                    op: name,
                    lhs: vec![m, n],
                    rhs: vec![rows],
                });
            }
            let mut out = Vec::with_capacity(rows * n);
            for _ in 0..rows {
                out.extend_from_slice(x[0].data());
            }
            Ok(Tensor::from_parts(vec![rows, n], out))
        }
    }
}

/// Vector-Jacobian products: gradients w.r.t. each input given the
/// upstream gradient `g` of the output `y`.
fn backward_op(kind: OpKind, x: &[&Tensor], y: &Tensor, g: &[f64]) -> Vec<Vec<f64>> {
    let elementwise = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..g.len()).map(f).collect() };
    match kind {
        OpKind::Add => vec![g.to_vec(), g.to_vec()],
        OpKind::Sub => vec![g.to_vec(), g.iter().map(|v| -v).collect()],
        OpKind::Mul => {
            let (a, b) = (x[0].data(), x[1].data());
            vec![elementwise(&|i| g[i] * b[i]), elementwise(&|i| g[i] * a[i])]
        }
        OpKind::Div => {
            let (a, b) = (x[0].data(), x[1].data());
            vec![
                elementwise(&|i| g[i] / b[i]),
                elementwise(&|i| -g[i] * a[i] / (b[i] * b[i])),
            ]
        }
        OpKind::MatMul => {
            let (m, k) = (x[0].shape()[0], x[0].shape()[1]);
            let n = x[1].shape()[1];
            let bt = transpose_raw(x[1].data(), k, n);
            let at = transpose_raw(x[0].data(), m, k);
            vec![matmul_raw(g, &bt, m, n, k), matmul_raw(&at, g, k, m, n)]
        }
        OpKind::Relu => {
            let a = x[0].data();
            vec![elementwise(&|i| if a[i] > 0.0 { g[i] } else { 0.0 })]
        }
        OpKind::Softplus => {
            let a = x[0].data();
            vec![elementwise(&|i| g[i] * sigmoid(a[i]))]
        }
        OpKind::Exp => {
            let out = y.data();
            vec![elementwise(&|i| g[i] * out[i])]
        }
        OpKind::Log => {
            let a = x[0].data();
            vec![elementwise(&|i| g[i] / a[i])]
        }
        OpKind::Square => {
            let a = x[0].data();
            vec![elementwise(&|i| 2.0 * a[i] * g[i])]
        }
        OpKind::Scale(k) => vec![g.iter().map(|v| v * k).collect()],
        OpKind::AddScalar(_) => vec![g.to_vec()],
        OpKind::SumOverAxis(axis) | OpKind::MeanOverAxis(axis) => {
            let (outer, len, inner) = axis_split(x[0].shape(), axis).expect("validated in forward");
            let scale = if matches!(kind, OpKind::MeanOverAxis(_)) {
                1.0 / len as f64
            } else {
                1.0
            };
            let mut out = vec![0.0; x[0].numel()];
            for o in 0..outer {
                for a in 0..len {
                    for i in 0..inner {
                        out[(o * len + a) * inner + i] = g[o * inner + i] * scale;
                    }
                }
            }
            vec![out]
        }
        OpKind::SoftmaxOverAxis(axis) => {
            let (outer, len, inner) = axis_split(x[0].shape(), axis).expect("validated in forward");
            let s = y.data();
            let mut out = vec![0.0; s.len()];
            for o in 0..outer {
                for i in 0..inner {
                    let idx = |a: usize| (o * len + a) * inner + i;
                    let dot: f64 = (0..len).map(|a| g[idx(a)] * s[idx(a)]).sum();
                    for a in 0..len {
                        out[idx(a)] = s[idx(a)] * (g[idx(a)] - dot);
                    }
                }
            }
            vec![out]
        }
        OpKind::Concat(axis) => {
            let outer: usize = x[0].shape()[..axis].iter().product();
            let inner: usize = x[0].shape()[axis + 1..].iter().product();
            let total_axis: usize = x.iter().map(|t| t.shape()[axis]).sum();
            let mut grads: Vec<Vec<f64>> = x.iter().map(|t| Vec::with_capacity(t.numel())).collect();
            for o in 0..outer {
                let mut offset = o * total_axis * inner;
                for (t, dst) in x.iter().zip(grads.iter_mut()) {
                    let chunk = t.shape()[axis] * inner;
                    dst.extend_from_slice(&g[offset..offset + chunk]);
                    offset += chunk;
                }
            }
            grads
        }
        OpKind::BroadcastAddRow => {
            let n = x[0].shape()[1];
            let mut row = vec![0.0; n];
            for chunk in g.chunks(n) {
                row.iter_mut().zip(chunk).for_each(|(r, v)| *r += v);
            }
            vec![g.to_vec(), row]
        }
        OpKind::Transpose => {
            let (m, n) = (x[0].shape()[0], x[0].shape()[1]);
            vec![transpose_raw(g, n, m)]
        }
        OpKind::SliceCols { start, len } => {
            let (m, n) = (x[0].shape()[0], x[0].shape()[1]);
            let mut out = vec![0.0; m * n];
            for r in 0..m {
                out[r * n + start..r * n + start + len].copy_from_slice(&g[r * len..(r + 1) * len]);
            }
            vec![out]
        }
        OpKind::RepeatRows(_) => {
            let n = x[0].shape()[1];
            let mut row = vec![0.0; n];
            for chunk in g.chunks(n) {
                row.iter_mut().zip(chunk).for_each(|(r, v)| *r += v);
            }
            vec![row]
        }
    }
}
