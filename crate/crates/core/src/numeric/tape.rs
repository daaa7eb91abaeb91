//! Reverse-mode differentiation over [`Tensor`] values.
//!
//! A [`Tape`] records every operation as a node in an arena. [`Var`] handles
//! index into it. Calling [`Tape::backward`] on a scalar node walks the arena
//! in reverse and accumulates adjoints for every node that depends on a
//! registered parameter.
//!
//! Elementwise binary ops accept either equal shapes or one operand whose
//! shape equals the other's shape with the leading (batch) axis dropped.
//! Nothing else broadcasts.

use super::gemm::gemm;
use super::{Real, Tensor, TensorError};

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Bcast {
    Same,
    /// rhs is repeated along the lhs leading axis
    Rhs,
    /// lhs is repeated along the rhs leading axis
    Lhs,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var, Bcast),
    Sub(Var, Var, Bcast),
    Mul(Var, Var, Bcast),
    Scale(Var, Real),
    AddScalar(Var),
    Exp(Var),
    Log(Var),
    Tanh(Var),
    Relu(Var),
    Powf(Var, Real),
    MatMul(Var, Var),
    BatchMatMul(Var, Var),
    SumAxis(Var, usize),
    MeanAxis(Var, usize),
    SumAll(Var),
    Concat(Vec<Var>, usize),
    Select {
        src: Var,
        axis: usize,
        index: usize,
    },
    Assign {
        base: Var,
        value: Var,
        axis: usize,
        index: usize,
    },
    Reshape(Var),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Gradients of a scalar loss with respect to every registered parameter,
/// in registration order.
#[derive(Clone, Debug)]
pub struct Gradients {
    entries: Vec<(String, Tensor)>,
}

impl Gradients {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn into_tensors(self) -> Vec<Tensor> {
        self.entries.into_iter().map(|(_, t)| t).collect()
    }
}

/// Operation recorder. Single-threaded; use one tape per worker.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<(String, Var)>,
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}

fn bcast_kind(op: &'static str, a: &Tensor, b: &Tensor) -> Result<Bcast, TensorError> {
    if a.shape() == b.shape() {
        Ok(Bcast::Same)
    } else if a.rank() == b.rank() + 1 && &a.shape()[1..] == b.shape() {
        Ok(Bcast::Rhs)
    } else if b.rank() == a.rank() + 1 && &b.shape()[1..] == a.shape() {
        Ok(Bcast::Lhs)
    } else {
        Err(mismatch(op, a, b))
    }
}

fn zip_bcast(a: &Tensor, b: &Tensor, kind: Bcast, f: impl Fn(Real, Real) -> Real) -> Tensor {
    match kind {
        Bcast::Same => Tensor::from_parts(
            a.shape().to_vec(),
            a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect(),
        ),
        Bcast::Rhs => {
            let inner = b.len();
            let bd = b.data();
            Tensor::from_parts(
                a.shape().to_vec(),
                a.data()
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| f(x, bd[i % inner]))
                    .collect(),
            )
        }
        Bcast::Lhs => {
            let inner = a.len();
            let ad = a.data();
            Tensor::from_parts(
                b.shape().to_vec(),
                b.data()
                    .iter()
                    .enumerate()
                    .map(|(i, &y)| f(ad[i % inner], y))
                    .collect(),
            )
        }
    }
}

/// Sums a batch-shaped gradient down to `target` shape (inverse of the
/// leading-axis broadcast).
fn reduce_to(g: &Tensor, target: &[usize]) -> Tensor {
    if g.shape() == target {
        return g.clone();
    }
    let inner: usize = target.iter().product();
    let mut out = vec![0.0; inner];
    for chunk in g.data().chunks(inner) {
        for (o, v) in out.iter_mut().zip(chunk) {
            *o += v;
        }
    }
    Tensor::from_parts(target.to_vec(), out)
}

fn check_axis(op: &'static str, t: &Tensor, axis: usize) -> Result<(), TensorError> {
    if axis >= t.rank() {
        return Err(TensorError::InvalidAxis {
            op,
            axis,
            shape: t.shape().to_vec(),
        });
    }
    Ok(())
}

fn select_data(src: &Tensor, axis: usize, index: usize) -> Tensor {
    let (outer, len, inner) = src.axis_split(axis);
    let mut data = Vec::with_capacity(outer * inner);
    for o in 0..outer {
        let start = (o * len + index) * inner;
        data.extend_from_slice(&src.data()[start..start + inner]);
    }
    let mut shape = src.shape().to_vec();
    shape.remove(axis);
    Tensor::from_parts(shape, data)
}

fn assign_data(base: &mut Tensor, axis: usize, index: usize, value: Option<&Tensor>) {
    let (outer, len, inner) = base.axis_split(axis);
    let data = base.data_mut();
    for o in 0..outer {
        let start = (o * len + index) * inner;
        let dst = &mut data[start..start + inner];
        match value {
            Some(v) => dst.copy_from_slice(&v.data()[o * inner..(o + 1) * inner]),
            None => dst.fill(0.0),
        }
    }
}

fn sum_axis_data(src: &Tensor, axis: usize) -> Tensor {
    let (outer, len, inner) = src.axis_split(axis);
    let mut data = vec![0.0; outer * inner];
    for o in 0..outer {
        let dst = &mut data[o * inner..(o + 1) * inner];
        for l in 0..len {
            let start = (o * len + l) * inner;
            for (d, s) in dst.iter_mut().zip(&src.data()[start..start + inner]) {
                *d += s;
            }
        }
    }
    let mut shape = src.shape().to_vec();
    shape.remove(axis);
    Tensor::from_parts(shape, data)
}

/// Repeats `g` (shape with `axis` removed) `len` times along `axis`.
fn expand_axis(g: &Tensor, shape: &[usize], axis: usize, factor: Real) -> Tensor {
    let outer: usize = shape[..axis].iter().product();
    let len = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let mut data = Vec::with_capacity(outer * len * inner);
    for o in 0..outer {
        let src = &g.data()[o * inner..(o + 1) * inner];
        for _ in 0..len {
            data.extend(src.iter().map(|v| v * factor));
        }
    }
    Tensor::from_parts(shape.to_vec(), data)
}

fn matmul_data(a: &Tensor, at: bool, b: &Tensor, bt: bool) -> Tensor {
    let (m, k) = if at {
        (a.shape()[1], a.shape()[0])
    } else {
        (a.shape()[0], a.shape()[1])
    };
    let n = if bt { b.shape()[0] } else { b.shape()[1] };
    let mut c = vec![0.0; m * n];
    gemm(m, k, n, a.data(), at, b.data(), bt, &mut c);
    Tensor::from_parts(vec![m, n], c)
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op_name: &'static str, value: Tensor, op: Op) -> Result<Var, TensorError> {
        if !value.is_finite() {
            return Err(TensorError::NonFinite { op: op_name });
        }
        let requires_grad = match &op {
            Op::Leaf => false,
            Op::Add(a, b, _) | Op::Sub(a, b, _) | Op::Mul(a, b, _) => self.rg(*a) || self.rg(*b),
            Op::MatMul(a, b) | Op::BatchMatMul(a, b) => self.rg(*a) || self.rg(*b),
            Op::Assign { base, value, .. } => self.rg(*base) || self.rg(*value),
            Op::Concat(vs, _) => vs.iter().any(|v| self.rg(*v)),
            Op::Scale(a, _)
            | Op::AddScalar(a)
            | Op::Exp(a)
            | Op::Log(a)
            | Op::Tanh(a)
            | Op::Relu(a)
            | Op::Powf(a, _)
            | Op::SumAxis(a, _)
            | Op::MeanAxis(a, _)
            | Op::SumAll(a)
            | Op::Reshape(a)
            | Op::Select { src: a, .. } => self.rg(*a),
        };
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Records a value that does not participate in differentiation.
    pub fn constant(&mut self, value: Tensor) -> Result<Var, TensorError> {
        self.push("constant", value, Op::Leaf)
    }

    /// Registers a named parameter; [`Tape::backward`] returns its gradient.
    pub fn param(&mut self, name: &str, value: Tensor) -> Result<Var, TensorError> {
        let v = self.push("param", value, Op::Leaf)?;
        self.nodes[v.0].requires_grad = true;
        self.params.push((name.to_string(), v));
        Ok(v)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        let kind = bcast_kind("add", ta, tb)?;
        let out = zip_bcast(ta, tb, kind, |x, y| x + y);
        self.push("add", out, Op::Add(a, b, kind))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        let kind = bcast_kind("sub", ta, tb)?;
        let out = zip_bcast(ta, tb, kind, |x, y| x - y);
        self.push("sub", out, Op::Sub(a, b, kind))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        let kind = bcast_kind("mul", ta, tb)?;
        let out = zip_bcast(ta, tb, kind, |x, y| x * y);
        self.push("mul", out, Op::Mul(a, b, kind))
    }

    pub fn scale(&mut self, a: Var, factor: Real) -> Result<Var, TensorError> {
        let out = self.value(a).map(|x| x * factor);
        self.push("scale", out, Op::Scale(a, factor))
    }

    pub fn add_scalar(&mut self, a: Var, offset: Real) -> Result<Var, TensorError> {
        let out = self.value(a).map(|x| x + offset);
        self.push("add_scalar", out, Op::AddScalar(a))
    }

    pub fn exp(&mut self, a: Var) -> Result<Var, TensorError> {
        let out = self.value(a).map(Real::exp);
        self.push("exp", out, Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Result<Var, TensorError> {
        let out = self.value(a).map(Real::ln);
        self.push("log", out, Op::Log(a))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, TensorError> {
        let out = self.value(a).map(Real::tanh);
        self.push("tanh", out, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, TensorError> {
        let out = self.value(a).map(|x| x.max(0.0));
        self.push("relu", out, Op::Relu(a))
    }

    pub fn powf(&mut self, a: Var, exponent: Real) -> Result<Var, TensorError> {
        let out = self.value(a).map(|x| x.powf(exponent));
        self.push("powf", out, Op::Powf(a, exponent))
    }

    /// `[m,k] x [k,n] -> [m,n]`
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rank() != 2 || tb.rank() != 2 || ta.shape()[1] != tb.shape()[0] {
            return Err(mismatch("matmul", ta, tb));
        }
        let out = matmul_data(ta, false, tb, false);
        self.push("matmul", out, Op::MatMul(a, b))
    }

    /// `[b,m,k] x [b,k,n] -> [b,m,n]`
    pub fn bmm(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rank() != 3
            || tb.rank() != 3
            || ta.shape()[0] != tb.shape()[0]
            || ta.shape()[2] != tb.shape()[1]
        {
            return Err(mismatch("bmm", ta, tb));
        }
        let out = batched(ta, false, tb, false);
        self.push("bmm", out, Op::BatchMatMul(a, b))
    }

    /// Sums out `axis`, removing it from the shape.
    pub fn sum_axis(&mut self, a: Var, axis: usize) -> Result<Var, TensorError> {
        check_axis("sum_axis", self.value(a), axis)?;
        let out = sum_axis_data(self.value(a), axis);
        self.push("sum_axis", out, Op::SumAxis(a, axis))
    }

    pub fn mean_axis(&mut self, a: Var, axis: usize) -> Result<Var, TensorError> {
        check_axis("mean_axis", self.value(a), axis)?;
        let len = self.value(a).shape()[axis] as Real;
        let out = sum_axis_data(self.value(a), axis).map(|x| x / len);
        self.push("mean_axis", out, Op::MeanAxis(a, axis))
    }

    /// Sum of every element, as a rank-0 tensor.
    pub fn sum_all(&mut self, a: Var) -> Result<Var, TensorError> {
        let out = Tensor::scalar(self.value(a).sum());
        self.push("sum_all", out, Op::SumAll(a))
    }

    pub fn mean_all(&mut self, a: Var) -> Result<Var, TensorError> {
        let n = self.value(a).len() as Real;
        let s = self.sum_all(a)?;
        self.scale(s, 1.0 / n)
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var, TensorError> {
        let first = self.value(parts[0]).clone();
        check_axis("concat", &first, axis)?;
        let mut total = 0;
        for &p in parts {
            let t = self.value(p);
            let mut s1 = t.shape().to_vec();
            let mut s0 = first.shape().to_vec();
            if s1.len() != s0.len() {
                return Err(mismatch("concat", &first, t));
            }
            total += s1[axis];
            s1[axis] = 0;
            s0[axis] = 0;
            if s1 != s0 {
                return Err(mismatch("concat", &first, t));
            }
        }
        let (outer, _, inner) = first.axis_split(axis);
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &p in parts {
                let t = self.value(p);
                let chunk = t.shape()[axis] * inner;
                data.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut shape = first.shape().to_vec();
        shape[axis] = total;
        self.push(
            "concat",
            Tensor::from_parts(shape, data),
            Op::Concat(parts.to_vec(), axis),
        )
    }

    /// Slice `index` along `axis`, removing that axis.
    pub fn select(&mut self, src: Var, axis: usize, index: usize) -> Result<Var, TensorError> {
        let t = self.value(src);
        check_axis("select", t, axis)?;
        if index >= t.shape()[axis] {
            return Err(TensorError::IndexOutOfRange {
                op: "select",
                index,
                len: t.shape()[axis],
            });
        }
        let out = select_data(t, axis, index);
        self.push("select", out, Op::Select { src, axis, index })
    }

    /// Copy of `base` whose slice `index` along `axis` is replaced by `value`.
    pub fn assign(
        &mut self,
        base: Var,
        axis: usize,
        index: usize,
        value: Var,
    ) -> Result<Var, TensorError> {
        let tb = self.value(base);
        check_axis("assign", tb, axis)?;
        if index >= tb.shape()[axis] {
            return Err(TensorError::IndexOutOfRange {
                op: "assign",
                index,
                len: tb.shape()[axis],
            });
        }
        let mut slice_shape = tb.shape().to_vec();
        slice_shape.remove(axis);
        let tv = self.value(value);
        if tv.shape() != slice_shape.as_slice() {
            return Err(mismatch("assign", tb, tv));
        }
        let mut out = tb.clone();
        assign_data(&mut out, axis, index, Some(tv));
        self.push(
            "assign",
            out,
            Op::Assign {
                base,
                value,
                axis,
                index,
            },
        )
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var, TensorError> {
        let out = self.value(a).clone().reshape(shape)?;
        self.push("reshape", out, Op::Reshape(a))
    }

    /// Gradient of the scalar `loss` with respect to every registered
    /// parameter. Parameters the loss does not depend on get zero tensors.
    pub fn backward(&self, loss: Var) -> Result<Gradients, TensorError> {
        let lt = self.value(loss);
        if lt.len() != 1 {
            return Err(TensorError::NotScalar {
                shape: lt.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::full(lt.shape(), 1.0));

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }

        let entries = self
            .params
            .iter()
            .map(|(name, v)| {
                let g = grads
                    .get(v.0)
                    .and_then(|g| g.clone())
                    .unwrap_or_else(|| Tensor::zeros(self.value(*v).shape()));
                (name.clone(), g)
            })
            .collect();
        Ok(Gradients { entries })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
        if !self.rg(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => {
                for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                    *a += b;
                }
            }
            slot @ None => *slot = Some(g),
        }
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[i];
        let out = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b, kind) | Op::Sub(a, b, kind) => {
                let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                let (sa, sb) = (self.value(*a).shape(), self.value(*b).shape());
                let ga = if *kind == Bcast::Lhs { reduce_to(g, sa) } else { g.clone() };
                let gb = if *kind == Bcast::Rhs { reduce_to(g, sb) } else { g.clone() };
                self.accumulate(grads, *a, ga);
                self.accumulate(grads, *b, gb.map(|x| sign * x));
            }
            Op::Mul(a, b, kind) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                if self.rg(*a) {
                    let full = match kind {
                        Bcast::Lhs => zip_bcast(g, tb, Bcast::Same, |x, y| x * y),
                        _ => zip_bcast(g, tb, *kind, |x, y| x * y),
                    };
                    self.accumulate(grads, *a, reduce_to(&full, ta.shape()));
                }
                if self.rg(*b) {
                    let full = match kind {
                        Bcast::Rhs => zip_bcast(g, ta, Bcast::Same, |x, y| x * y),
                        Bcast::Lhs => zip_bcast(g, ta, Bcast::Rhs, |x, y| x * y),
                        Bcast::Same => zip_bcast(g, ta, Bcast::Same, |x, y| x * y),
                    };
                    self.accumulate(grads, *b, reduce_to(&full, tb.shape()));
                }
            }
            Op::Scale(a, f) => self.accumulate(grads, *a, g.map(|x| x * f)),
            Op::AddScalar(a) | Op::Reshape(a) => {
                let ga = g.clone().reshape(self.value(*a).shape()).expect("same size");
                self.accumulate(grads, *a, ga);
            }
            Op::Exp(a) => self.accumulate(grads, *a, zip_bcast(g, out, Bcast::Same, |x, y| x * y)),
            Op::Log(a) => {
                let ga = zip_bcast(g, self.value(*a), Bcast::Same, |x, y| x / y);
                self.accumulate(grads, *a, ga)
            }
            Op::Tanh(a) => {
                let ga = zip_bcast(g, out, Bcast::Same, |x, y| x * (1.0 - y * y));
                self.accumulate(grads, *a, ga)
            }
            Op::Relu(a) => {
                let ga = zip_bcast(g, self.value(*a), Bcast::Same, |x, y| {
                    if y > 0.0 {
                        x
                    } else {
                        0.0
                    }
                });
                self.accumulate(grads, *a, ga)
            }
            Op::Powf(a, p) => {
                let ga = zip_bcast(g, self.value(*a), Bcast::Same, |x, y| x * p * y.powf(p - 1.0));
                self.accumulate(grads, *a, ga)
            }
            Op::MatMul(a, b) => {
                if self.rg(*a) {
                    self.accumulate(grads, *a, matmul_data(g, false, self.value(*b), true));
                }
                if self.rg(*b) {
                    self.accumulate(grads, *b, matmul_data(self.value(*a), true, g, false));
                }
            }
            Op::BatchMatMul(a, b) => {
                if self.rg(*a) {
                    self.accumulate(grads, *a, batched(g, false, self.value(*b), true));
                }
                if self.rg(*b) {
                    self.accumulate(grads, *b, batched(self.value(*a), true, g, false));
                }
            }
            Op::SumAxis(a, axis) => {
                let ga = expand_axis(g, self.value(*a).shape(), *axis, 1.0);
                self.accumulate(grads, *a, ga)
            }
            Op::MeanAxis(a, axis) => {
                let shape = self.value(*a).shape();
                let ga = expand_axis(g, shape, *axis, 1.0 / shape[*axis] as Real);
                self.accumulate(grads, *a, ga)
            }
            Op::SumAll(a) => {
                let ga = Tensor::full(self.value(*a).shape(), g.data()[0]);
                self.accumulate(grads, *a, ga)
            }
            Op::Concat(parts, axis) => {
                let (outer, _, inner) = out.axis_split(*axis);
                let total = out.shape()[*axis];
                let mut offset = 0;
                for &p in parts {
                    let t = self.value(p);
                    let len = t.shape()[*axis];
                    if self.rg(p) {
                        let mut data = Vec::with_capacity(t.len());
                        for o in 0..outer {
                            let start = (o * total + offset) * inner;
                            data.extend_from_slice(&g.data()[start..start + len * inner]);
                        }
                        self.accumulate(grads, p, Tensor::from_parts(t.shape().to_vec(), data));
                    }
                    offset += len;
                }
            }
            Op::Select { src, axis, index } => {
                let mut gs = Tensor::zeros(self.value(*src).shape());
                assign_data(&mut gs, *axis, *index, Some(g));
                self.accumulate(grads, *src, gs)
            }
            Op::Assign {
                base,
                value,
                axis,
                index,
            } => {
                if self.rg(*value) {
                    self.accumulate(grads, *value, select_data(g, *axis, *index));
                }
                if self.rg(*base) {
                    let mut gb = g.clone();
                    assign_data(&mut gb, *axis, *index, None);
                    self.accumulate(grads, *base, gb);
                }
            }
        }
    }
}

fn batched(a: &Tensor, at: bool, b: &Tensor, bt: bool) -> Tensor {
    let batch = a.shape()[0];
    let (m, k) = if at {
        (a.shape()[2], a.shape()[1])
    } else {
        (a.shape()[1], a.shape()[2])
    };
    let n = if bt { b.shape()[1] } else { b.shape()[2] };
    let a_stride = a.shape()[1] * a.shape()[2];
    let b_stride = b.shape()[1] * b.shape()[2];
    let mut c = vec![0.0; batch * m * n];
    for i in 0..batch {
        gemm(
            m,
            k,
            n,
            &a.data()[i * a_stride..(i + 1) * a_stride],
            at,
            &b.data()[i * b_stride..(i + 1) * b_stride],
            bt,
            &mut c[i * m * n..(i + 1) * m * n],
        );
    }
    Tensor::from_parts(vec![batch, m, n], c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[Real]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn exp_of_zero_is_one() {
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::zeros(&[2, 3])).unwrap();
        let e = tape.exp(z).unwrap();
        assert_eq!(tape.value(e), &Tensor::ones(&[2, 3]));
    }

    #[test]
    fn matmul_identity() {
        let mut tape = Tape::new();
        let a = tape.constant(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0])).unwrap();
        let i = tape.constant(Tensor::eye(2)).unwrap();
        let p = tape.matmul(a, i).unwrap();
        assert_eq!(tape.value(p).data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn sum_last_axis() {
        let mut tape = Tape::new();
        let a = tape.constant(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0])).unwrap();
        let s = tape.sum_axis(a, 1).unwrap();
        assert_eq!(tape.value(s).data(), &[3.0, 7.0]);
        assert_eq!(tape.value(s).shape(), &[2]);
    }

    #[test]
    fn shape_mismatch_names_op_and_shapes() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(&[2, 3])).unwrap();
        let b = tape.constant(Tensor::zeros(&[2, 2])).unwrap();
        let err = tape.matmul(a, b).unwrap_err();
        assert_eq!(
            err,
            TensorError::ShapeMismatch {
                op: "matmul",
                lhs: vec![2, 3],
                rhs: vec![2, 2]
            }
        );
        assert!(tape.add(a, b).is_err());
        // broadcasting only over the leading axis
        let c = tape.constant(Tensor::zeros(&[2])).unwrap();
        assert!(tape.add(a, c).is_err());
        let d = tape.constant(Tensor::zeros(&[3])).unwrap();
        assert!(tape.add(a, d).is_ok());
    }

    #[test]
    fn non_finite_is_an_error() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::full(&[2], 1000.0)).unwrap();
        assert_eq!(tape.exp(a).unwrap_err(), TensorError::NonFinite { op: "exp" });
        let z = tape.constant(Tensor::zeros(&[1])).unwrap();
        assert!(tape.log(z).is_err());
    }

    #[test]
    fn gradient_of_sum_is_ones() {
        let mut tape = Tape::new();
        let p = tape.param("p", t(&[3], &[0.5, -1.0, 2.0])).unwrap();
        let s = tape.sum_all(p).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get("p").unwrap().data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn gradient_of_sum_of_squares() {
        let mut tape = Tape::new();
        let p = tape.param("p", t(&[3], &[1.0, 2.0, 3.0])).unwrap();
        let sq = tape.mul(p, p).unwrap();
        let s = tape.sum_all(sq).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get("p").unwrap().data(), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn unused_parameter_gets_zero_gradient() {
        let mut tape = Tape::new();
        let p = tape.param("used", t(&[2], &[1.0, 2.0])).unwrap();
        tape.param("unused", t(&[2, 2], &[1.0; 4])).unwrap();
        let s = tape.sum_all(p).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get("unused").unwrap(), &Tensor::zeros(&[2, 2]));
    }

    #[test]
    fn backward_requires_scalar() {
        let mut tape = Tape::new();
        let p = tape.param("p", Tensor::zeros(&[2])).unwrap();
        assert!(matches!(
            tape.backward(p),
            Err(TensorError::NotScalar { .. })
        ));
    }

    #[test]
    fn select_and_assign_round_trip() {
        let mut tape = Tape::new();
        let a = tape
            .constant(Tensor::from_fn(&[2, 3, 2], |i| i as Real))
            .unwrap();
        let row = tape.select(a, 1, 1).unwrap();
        assert_eq!(tape.value(row).data(), &[2.0, 3.0, 8.0, 9.0]);
        let zeros = tape.constant(Tensor::zeros(&[2, 2])).unwrap();
        let b = tape.assign(a, 1, 1, zeros).unwrap();
        assert_eq!(
            tape.value(b).data(),
            &[0.0, 1.0, 0.0, 0.0, 4.0, 5.0, 6.0, 7.0, 0.0, 0.0, 10.0, 11.0]
        );
    }

    #[test]
    fn concat_middle_axis() {
        let mut tape = Tape::new();
        let a = tape.constant(t(&[2, 1], &[1.0, 2.0])).unwrap();
        let b = tape.constant(t(&[2, 2], &[3.0, 4.0, 5.0, 6.0])).unwrap();
        let c = tape.concat(&[a, b], 1).unwrap();
        assert_eq!(tape.value(c).data(), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
    }
}
