//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] records every primitive applied during one forward pass. Nodes
//! are appended after their inputs, so the tape order is already topological
//! and [`Graph::backward`] is a single reverse sweep. `backward` consumes the
//! graph; build a new one for the next pass.
//!
//! Shape rules:
//!
//! * `add`, `sub`, `mul`, `div` broadcast NumPy-style: shapes are aligned on
//!   the right, missing leading axes count as 1, and an axis of extent 1
//!   stretches to match the other operand. The gradient of a stretched
//!   operand is summed back over the stretched axes.
//! * `matmul` contracts a `[m, k]` matrix with a `[k, n]` matrix.
//! * `concat` joins along one axis; all other extents must agree.
//! * `slice` keeps a half-open range along one axis.
//! * `sum` and `mean` reduce to a rank-0 scalar, `sum_axis` keeps the reduced
//!   axis with extent 1, `softmax` normalizes along one axis.
//! * Every unary op is elementwise and keeps the shape.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Primitive operations, for callers that want to dispatch generically
/// through [`Graph::apply`].
#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    MatMul,
    Add,
    Sub,
    Mul,
    Div,
    Sigmoid,
    Tanh,
    Relu,
    Abs,
    Square,
    Sqrt,
    Exp,
    Concat { axis: usize },
    Slice { axis: usize, range: Range<usize> },
    Sum,
    Mean,
    SumAxis { axis: usize },
    Softmax { axis: usize },
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Affine(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Abs(Var),
    Square(Var),
    Sqrt(Var),
    Exp(Var),
    Concat(Vec<Var>, usize),
    Slice(Var, usize, usize),
    Reshape(Var),
    Transpose(Var),
    Sum(Var),
    Mean(Var),
    SumAxis(Var, usize),
    Softmax(Var, usize),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Record of one forward pass.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every trainable leaf of a graph.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for a leaf created with [`Graph::param`]; `None` for
    /// constants and intermediate nodes.
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, var: Var) -> Option<Tensor> {
        self.grads.get_mut(var.0).and_then(|g| g.take())
    }
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// Splits a shape around `axis` into (outer, axis extent, inner) counts.
fn split_at_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = numel(&shape[..axis]);
    let inner = numel(&shape[axis + 1..]);
    (outer, shape[axis], inner)
}

fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for i in 0..rank {
        let da = if i + a.len() >= rank { a[i + a.len() - rank] } else { 1 };
        let db = if i + b.len() >= rank { b[i + b.len() - rank] } else { 1 };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

/// Strides of `shape` viewed inside `out` (rank-aligned on the right), with
/// zero stride on every broadcast axis.
fn broadcast_strides(shape: &[usize], out: &[usize]) -> Vec<usize> {
    let rank = out.len();
    let pad = rank - shape.len();
    let mut strides = vec![0; rank];
    let mut acc = 1;
    for i in (0..rank).rev() {
        if i < pad {
            continue;
        }
        let dim = shape[i - pad];
        strides[i] = if dim == 1 && out[i] != 1 { 0 } else { acc };
        acc *= dim;
    }
    strides
}

/// Walks every output position of a broadcast binary op, yielding the flat
/// offsets into the output and both operands.
fn for_each_broadcast(out: &[usize], sa: &[usize], sb: &[usize], mut f: impl FnMut(usize, usize, usize)) {
    let total = numel(out);
    if total == 0 {
        return;
    }
    let rank = out.len();
    let mut counter = vec![0usize; rank];
    let (mut oa, mut ob) = (0usize, 0usize);
    for o in 0..total {
        f(o, oa, ob);
        for axis in (0..rank).rev() {
            counter[axis] += 1;
            oa += sa[axis];
            ob += sb[axis];
            if counter[axis] < out[axis] {
                break;
            }
            oa -= sa[axis] * out[axis];
            ob -= sb[axis] * out[axis];
            counter[axis] = 0;
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

/// `c += a · b` for row-major `a: [m, k]`, `b: [k, n]`.
fn gemm_acc(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: slice lengths are checked above and the strides describe
    // row-major layouts that stay within those lengths.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            1.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `ga += g · bᵀ` with `g: [m, n]`, `b: [k, n]`.
fn gemm_acc_bt(m: usize, n: usize, k: usize, g: &[f64], b: &[f64], ga: &mut [f64]) {
    if m == 0 || k == 0 {
        return;
    }
    // SAFETY: bᵀ is read through swapped strides of the same [k, n] buffer.
    unsafe {
        matrixmultiply::dgemm(
            m,
            n,
            k,
            1.0,
            g.as_ptr(),
            n as isize,
            1,
            b.as_ptr(),
            1,
            n as isize,
            1.0,
            ga.as_mut_ptr(),
            k as isize,
            1,
        );
    }
}

/// `gb += aᵀ · g` with `a: [m, k]`, `g: [m, n]`.
fn gemm_acc_at(m: usize, k: usize, n: usize, a: &[f64], g: &[f64], gb: &mut [f64]) {
    if k == 0 || n == 0 {
        return;
    }
    // SAFETY: aᵀ is read through swapped strides of the same [m, k] buffer.
    unsafe {
        matrixmultiply::dgemm(
            k,
            m,
            n,
            1.0,
            a.as_ptr(),
            1,
            k as isize,
            g.as_ptr(),
            n as isize,
            1,
            1.0,
            gb.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Trainable leaf: receives a gradient from [`Graph::backward`].
    pub fn param(&mut self, value: Tensor) -> Result<Var> {
        self.leaf(value, true)
    }

    /// Non-trainable leaf (inputs, masks, zero states).
    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.leaf(value, false)
    }

    fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: "leaf" });
        }
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, op: &'static str, value: Tensor, node_op: Op, inputs: &[Var]) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op });
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op: node_op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Dispatches one primitive by tag.
    pub fn apply(&mut self, prim: &Primitive, inputs: &[Var]) -> Result<Var> {
        let arity = |n: usize| -> Result<()> {
            if inputs.len() != n {
                return Err(Error::Contract(format!(
                    "{prim:?} takes {n} inputs, got {}",
                    inputs.len()
                )));
            }
            Ok(())
        };
        match prim {
            Primitive::Concat { axis } => {
                return self.concat(inputs, *axis);
            }
            Primitive::MatMul | Primitive::Add | Primitive::Sub | Primitive::Mul | Primitive::Div => arity(2)?,
            _ => arity(1)?,
        }
        let x = inputs[0];
        match prim {
            Primitive::MatMul => self.matmul(x, inputs[1]),
            Primitive::Add => self.add(x, inputs[1]),
            Primitive::Sub => self.sub(x, inputs[1]),
            Primitive::Mul => self.mul(x, inputs[1]),
            Primitive::Div => self.div(x, inputs[1]),
            Primitive::Sigmoid => self.sigmoid(x),
            Primitive::Tanh => self.tanh(x),
            Primitive::Relu => self.relu(x),
            Primitive::Abs => self.abs(x),
            Primitive::Square => self.square(x),
            Primitive::Sqrt => self.sqrt(x),
            Primitive::Exp => self.exp(x),
            Primitive::Slice { axis, range } => self.slice(x, *axis, range.clone()),
            Primitive::Sum => self.sum(x),
            Primitive::Mean => self.mean(x),
            Primitive::SumAxis { axis } => self.sum_axis(x, *axis),
            Primitive::Softmax { axis } => self.softmax(x, *axis),
            Primitive::Concat { .. } => unreachable!(),
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::shape("matmul", format!("cannot contract {sa:?} with {sb:?}")));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        gemm_acc(m, k, n, self.value(a).data(), self.value(b).data(), &mut out);
        let value = Tensor::new(vec![m, n], out)?;
        self.push("matmul", value, Op::MatMul(a, b), &[a, b])
    }

    fn binary(&mut self, name: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let value = if sa == sb {
            let data = self
                .value(a)
                .data()
                .iter()
                .zip(self.value(b).data())
                .map(|(&x, &y)| f(x, y))
                .collect();
            Tensor::new(sa, data)?
        } else {
            let out = broadcast_shape(&sa, &sb)
                .ok_or_else(|| Error::shape(name, format!("cannot broadcast {sa:?} with {sb:?}")))?;
            let (stra, strb) = (broadcast_strides(&sa, &out), broadcast_strides(&sb, &out));
            let (da, db) = (self.value(a).data(), self.value(b).data());
            let mut data = vec![0.0; numel(&out)];
            for_each_broadcast(&out, &stra, &strb, |o, ia, ib| data[o] = f(da[ia], db[ib]));
            Tensor::new(out, data)?
        };
        self.push(name, value, op, &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("div", a, b, |x, y| x / y, Op::Div(a, b))
    }

    /// `scale * x + shift`.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Result<Var> {
        let value = self.value(x).map(|v| scale * v + shift);
        self.push("affine", value, Op::Affine(x, scale), &[x])
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Result<Var> {
        self.affine(x, s, 0.0)
    }

    fn unary(&mut self, name: &'static str, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Result<Var> {
        let value = self.value(x).map(f);
        self.push(name, value, op, &[x])
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.unary("sigmoid", x, sigmoid, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        self.unary("tanh", x, f64::tanh, Op::Tanh(x))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.unary("relu", x, |v| v.max(0.0), Op::Relu(x))
    }

    pub fn abs(&mut self, x: Var) -> Result<Var> {
        self.unary("abs", x, f64::abs, Op::Abs(x))
    }

    pub fn square(&mut self, x: Var) -> Result<Var> {
        self.unary("square", x, |v| v * v, Op::Square(x))
    }

    pub fn sqrt(&mut self, x: Var) -> Result<Var> {
        if self.value(x).data().iter().any(|&v| v < 0.0) {
            return Err(Error::NonFinite { op: "sqrt" });
        }
        self.unary("sqrt", x, f64::sqrt, Op::Sqrt(x))
    }

    pub fn exp(&mut self, x: Var) -> Result<Var> {
        self.unary("exp", x, f64::exp, Op::Exp(x))
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = *inputs
            .first()
            .ok_or_else(|| Error::Contract("concat of zero tensors".into()))?;
        let base = self.shape(first).to_vec();
        if axis >= base.len() {
            return Err(Error::shape("concat", format!("axis {axis} out of range for {base:?}")));
        }
        let mut total = 0;
        for &v in inputs {
            let s = self.shape(v);
            let compatible =
                s.len() == base.len() && s.iter().zip(&base).enumerate().all(|(i, (x, y))| i == axis || x == y);
            if !compatible {
                return Err(Error::shape(
                    "concat",
                    format!("{s:?} does not match {base:?} off axis {axis}"),
                ));
            }
            total += s[axis];
        }
        let mut out_shape = base.clone();
        out_shape[axis] = total;
        let (outer, _, inner) = split_at_axis(&out_shape, axis);
        let mut data = Vec::with_capacity(numel(&out_shape));
        for o in 0..outer {
            for &v in inputs {
                let len = self.shape(v)[axis] * inner;
                data.extend_from_slice(&self.value(v).data()[o * len..(o + 1) * len]);
            }
        }
        let value = Tensor::new(out_shape, data)?;
        self.push("concat", value, Op::Concat(inputs.to_vec(), axis), inputs)
    }

    pub fn slice(&mut self, x: Var, axis: usize, range: Range<usize>) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() || range.start > range.end || range.end > shape[axis] {
            return Err(Error::shape(
                "slice",
                format!("range {range:?} on axis {axis} of {shape:?}"),
            ));
        }
        let (outer, len, inner) = split_at_axis(&shape, axis);
        let width = range.end - range.start;
        let src = self.value(x).data();
        let mut data = Vec::with_capacity(outer * width * inner);
        for o in 0..outer {
            let start = (o * len + range.start) * inner;
            data.extend_from_slice(&src[start..start + width * inner]);
        }
        let mut out_shape = shape;
        out_shape[axis] = width;
        let value = Tensor::new(out_shape, data)?;
        self.push("slice", value, Op::Slice(x, axis, range.start), &[x])
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self
            .value(x)
            .clone()
            .reshape(shape.to_vec())
            .map_err(|_| Error::shape("reshape", format!("{:?} into {shape:?}", self.shape(x))))?;
        self.push("reshape", value, Op::Reshape(x), &[x])
    }

    /// Matrix transpose.
    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if shape.len() != 2 {
            return Err(Error::shape("transpose", format!("needs a matrix, got {shape:?}")));
        }
        let (r, c) = (shape[0], shape[1]);
        let src = self.value(x).data();
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                data[j * r + i] = src[i * c + j];
            }
        }
        let value = Tensor::new(vec![c, r], data)?;
        self.push("transpose", value, Op::Transpose(x), &[x])
    }

    /// Sum of all elements, as a rank-0 tensor.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).data().iter().sum();
        self.push("sum", Tensor::scalar(s), Op::Sum(x), &[x])
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        if t.is_empty() {
            return Err(Error::shape("mean", "mean of an empty tensor"));
        }
        let m = t.data().iter().sum::<f64>() / t.len() as f64;
        self.push("mean", Tensor::scalar(m), Op::Mean(x), &[x])
    }

    /// Sum along `axis`, keeping it with extent 1.
    pub fn sum_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(Error::shape("sum_axis", format!("axis {axis} of {shape:?}")));
        }
        let (outer, len, inner) = split_at_axis(&shape, axis);
        let src = self.value(x).data();
        let mut data = vec![0.0; outer * inner];
        for o in 0..outer {
            for l in 0..len {
                let row = &src[(o * len + l) * inner..(o * len + l + 1) * inner];
                for (d, &v) in data[o * inner..(o + 1) * inner].iter_mut().zip(row) {
                    *d += v;
                }
            }
        }
        let mut out_shape = shape;
        out_shape[axis] = 1;
        let value = Tensor::new(out_shape, data)?;
        self.push("sum_axis", value, Op::SumAxis(x, axis), &[x])
    }

    /// Softmax along `axis`, computed after subtracting the running maximum.
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() || shape[axis] == 0 {
            return Err(Error::shape("softmax", format!("axis {axis} of {shape:?}")));
        }
        let (outer, len, inner) = split_at_axis(&shape, axis);
        let src = self.value(x).data();
        let mut data = vec![0.0; src.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |l: usize| (o * len + l) * inner + i;
                let max = (0..len).map(|l| src[at(l)]).fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for l in 0..len {
                    let e = (src[at(l)] - max).exp();
                    data[at(l)] = e;
                    total += e;
                }
                for l in 0..len {
                    data[at(l)] /= total;
                }
            }
        }
        let value = Tensor::new(shape, data)?;
        self.push("softmax", value, Op::Softmax(x, axis), &[x])
    }

    /// Reverse sweep from a one-element `loss`.
    ///
    /// Consumes the graph. Every trainable leaf gets a gradient, zero when
    /// the loss does not depend on it.
    pub fn backward(self, loss: Var) -> Result<Gradients> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[loss.0].value.shape()
            )));
        }
        let nodes = self.nodes;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let node = &nodes[i];
            if !node.requires_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            propagate(&nodes, node, &g, &mut grads);
            // Keep the gradient slot for non-leaves empty; only leaves are reported.
        }

        let grads = nodes
            .iter()
            .zip(grads)
            .map(|(node, g)| match node.op {
                Op::Leaf if node.requires_grad => {
                    let shape = node.value.shape().to_vec();
                    let data = g.unwrap_or_else(|| vec![0.0; node.value.len()]);
                    Some(Tensor::new(shape, data).expect("gradient shape"))
                }
                _ => None,
            })
            .collect();
        Ok(Gradients { grads })
    }
}

/// Adds `delta` into the gradient slot of `v`, allocating on first touch.
fn accumulate(grads: &mut [Option<Vec<f64>>], nodes: &[Node], v: Var, delta: impl FnOnce(&mut [f64])) {
    if !nodes[v.0].requires_grad {
        return;
    }
    let slot = grads[v.0].get_or_insert_with(|| vec![0.0; nodes[v.0].value.len()]);
    delta(slot);
}

#[allow(clippy::too_many_arguments)]
fn binary_backward(
    nodes: &[Node],
    grads: &mut [Option<Vec<f64>>],
    out_shape: &[usize],
    g: &[f64],
    a: Var,
    b: Var,
    da: impl Fn(f64, f64, f64) -> f64,
    db: impl Fn(f64, f64, f64) -> f64,
) {
    let (ta, tb) = (&nodes[a.0].value, &nodes[b.0].value);
    let (xa, xb) = (ta.data(), tb.data());
    if ta.shape() == out_shape && tb.shape() == out_shape {
        accumulate(grads, nodes, a, |s| {
            for (k, s) in s.iter_mut().enumerate() {
                *s += da(g[k], xa[k], xb[k]);
            }
        });
        accumulate(grads, nodes, b, |s| {
            for (k, s) in s.iter_mut().enumerate() {
                *s += db(g[k], xa[k], xb[k]);
            }
        });
        return;
    }
    let sa = broadcast_strides(ta.shape(), out_shape);
    let sb = broadcast_strides(tb.shape(), out_shape);
    accumulate(grads, nodes, a, |s| {
        for_each_broadcast(out_shape, &sa, &sb, |o, ia, ib| s[ia] += da(g[o], xa[ia], xb[ib]));
    });
    accumulate(grads, nodes, b, |s| {
        for_each_broadcast(out_shape, &sa, &sb, |o, ia, ib| s[ib] += db(g[o], xa[ia], xb[ib]));
    });
}

fn unary_backward(
    nodes: &[Node],
    grads: &mut [Option<Vec<f64>>],
    x: Var,
    y: &[f64],
    g: &[f64],
    local: impl Fn(f64, f64) -> f64,
) {
    let xs = nodes[x.0].value.data();
    accumulate(grads, nodes, x, |s| {
        for k in 0..s.len() {
            s[k] += g[k] * local(xs[k], y[k]);
        }
    });
}

fn propagate(nodes: &[Node], node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
    let y = node.value.data();
    let out_shape = node.value.shape();
    match node.op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            let (sa, sb) = (nodes[a.0].value.shape(), nodes[b.0].value.shape());
            let (m, k, n) = (sa[0], sa[1], sb[1]);
            let (xa, xb) = (nodes[a.0].value.data(), nodes[b.0].value.data());
            accumulate(grads, nodes, a, |s| gemm_acc_bt(m, n, k, g, xb, s));
            accumulate(grads, nodes, b, |s| gemm_acc_at(m, k, n, xa, g, s));
        }
        Op::Add(a, b) => binary_backward(nodes, grads, out_shape, g, a, b, |g, _, _| g, |g, _, _| g),
        Op::Sub(a, b) => binary_backward(nodes, grads, out_shape, g, a, b, |g, _, _| g, |g, _, _| -g),
        Op::Mul(a, b) => binary_backward(nodes, grads, out_shape, g, a, b, |g, _, xb| g * xb, |g, xa, _| g * xa),
        Op::Div(a, b) => binary_backward(
            nodes,
            grads,
            out_shape,
            g,
            a,
            b,
            |g, _, xb| g / xb,
            |g, xa, xb| -g * xa / (xb * xb),
        ),
        Op::Affine(x, scale) => unary_backward(nodes, grads, x, y, g, |_, _| scale),
        Op::Sigmoid(x) => unary_backward(nodes, grads, x, y, g, |_, y| y * (1.0 - y)),
        Op::Tanh(x) => unary_backward(nodes, grads, x, y, g, |_, y| 1.0 - y * y),
        Op::Relu(x) => unary_backward(nodes, grads, x, y, g, |x, _| if x > 0.0 { 1.0 } else { 0.0 }),
        Op::Abs(x) => unary_backward(nodes, grads, x, y, g, |x, _| {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        }),
        Op::Square(x) => unary_backward(nodes, grads, x, y, g, |x, _| 2.0 * x),
        Op::Sqrt(x) => unary_backward(nodes, grads, x, y, g, |_, y| 0.5 / y),
        Op::Exp(x) => unary_backward(nodes, grads, x, y, g, |_, y| y),
        Op::Concat(ref inputs, axis) => {
            let (outer, _, inner) = split_at_axis(out_shape, axis);
            let total = out_shape[axis] * inner;
            let mut offset = 0;
            for &v in inputs {
                let len = nodes[v.0].value.shape()[axis] * inner;
                accumulate(grads, nodes, v, |s| {
                    for o in 0..outer {
                        let src = &g[o * total + offset..o * total + offset + len];
                        for (d, &gv) in s[o * len..(o + 1) * len].iter_mut().zip(src) {
                            *d += gv;
                        }
                    }
                });
                offset += len;
            }
        }
        Op::Slice(x, axis, start) => {
            let in_shape = nodes[x.0].value.shape();
            let (outer, len, inner) = split_at_axis(in_shape, axis);
            let width = out_shape[axis];
            accumulate(grads, nodes, x, |s| {
                for o in 0..outer {
                    let dst = (o * len + start) * inner;
                    let src = &g[o * width * inner..(o + 1) * width * inner];
                    for (d, &gv) in s[dst..dst + width * inner].iter_mut().zip(src) {
                        *d += gv;
                    }
                }
            });
        }
        Op::Reshape(x) => accumulate(grads, nodes, x, |s| {
            for (d, &gv) in s.iter_mut().zip(g) {
                *d += gv;
            }
        }),
        Op::Transpose(x) => {
            let (r, c) = (out_shape[1], out_shape[0]);
            accumulate(grads, nodes, x, |s| {
                for i in 0..r {
                    for j in 0..c {
                        s[i * c + j] += g[j * r + i];
                    }
                }
            });
        }
        Op::Sum(x) => accumulate(grads, nodes, x, |s| {
            for d in s.iter_mut() {
                *d += g[0];
            }
        }),
        Op::Mean(x) => {
            let n = nodes[x.0].value.len() as f64;
            accumulate(grads, nodes, x, |s| {
                for d in s.iter_mut() {
                    *d += g[0] / n;
                }
            })
        }
        Op::SumAxis(x, axis) => {
            let in_shape = nodes[x.0].value.shape();
            let (outer, len, inner) = split_at_axis(in_shape, axis);
            accumulate(grads, nodes, x, |s| {
                for o in 0..outer {
                    for l in 0..len {
                        let dst = &mut s[(o * len + l) * inner..(o * len + l + 1) * inner];
                        for (d, &gv) in dst.iter_mut().zip(&g[o * inner..(o + 1) * inner]) {
                            *d += gv;
                        }
                    }
                }
            });
        }
        Op::Softmax(x, axis) => {
            let (outer, len, inner) = split_at_axis(out_shape, axis);
            accumulate(grads, nodes, x, |s| {
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |l: usize| (o * len + l) * inner + i;
                        let dot: f64 = (0..len).map(|l| g[at(l)] * y[at(l)]).sum();
                        for l in 0..len {
                            s[at(l)] += y[at(l)] * (g[at(l)] - dot);
                        }
                    }
                }
            });
        }
    }
}
