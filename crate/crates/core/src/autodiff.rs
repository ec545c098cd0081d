//! Tape-based reverse-mode automatic differentiation.
//!
//! Every operation evaluates eagerly and appends a node to the [`Tape`]. A
//! node only refers to nodes recorded before it, so the tape is always in
//! topological order and [`Tape::backward`] is a single reverse sweep.
//!
//! Operations whose gradients are easier to state in closed form than to
//! compose from primitives (the spectral transforms, the recurrent scan)
//! plug in through the [`Function`] trait.

use crate::error::{FrwkvError, Result};
use crate::tensor::{gemm_acc, gemm_nt_acc, gemm_tn_acc, Tensor};

/// Denominator guard for [`Tape::l2_normalize_last`].
pub const L2_EPS: f64 = 1e-12;
/// Variance guard for [`Tape::layer_norm_last`].
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A differentiable operation with a hand-written backward rule.
pub trait Function {
    fn name(&self) -> &'static str;

    /// Vector-Jacobian product: one entry per input, `None` when the input
    /// receives no gradient.
    fn backward(&self, inputs: &[&Tensor], output: &Tensor, grad: &[f64]) -> Vec<Option<Vec<f64>>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Sigmoid,
    Tanh,
    Exp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Broadcast {
    Same,
    Scalar,
    Trailing,
}

enum Op {
    Leaf,
    MatMul(Var, Var),
    Binary(BinaryOp, Var, Var, Broadcast),
    Unary(UnaryOp, Var),
    Scale(Var, f64),
    Reshape(Var),
    TransposeLast2(Var),
    SumAll(Var),
    MeanAll(Var),
    SumLast(Var),
    MulExpand(Var, Var),
    AddExpand(Var, Var),
    L2NormalizeLast(Var),
    LayerNormLast(Var),
    TokenShift(Var),
    Custom(Vec<Var>, Box<dyn Function>),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Recording of a forward computation.
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
    grad_enabled: bool,
    last_visits: usize,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
            grad_enabled: true,
            last_visits: 0,
        }
    }

    /// A tape that never tracks gradients; custom ops may skip saving
    /// intermediates for backward.
    pub fn inference() -> Self {
        Self {
            grad_enabled: false,
            ..Self::new()
        }
    }

    pub fn grad_enabled(&self) -> bool {
        self.grad_enabled
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of non-leaf nodes the last backward sweep propagated through.
    pub fn last_backward_visits(&self) -> usize {
        self.last_visits
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

    /// Gradient of the last backward target with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Records a leaf; it is differentiable when `t.requires_grad` is set.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        let rg = t.requires_grad && self.grad_enabled;
        let mut value = t;
        value.grad = None;
        self.push(value, Op::Leaf, rg)
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        let mut value = t;
        value.requires_grad = false;
        self.leaf(value)
    }

    pub fn param(&mut self, t: &Tensor) -> Var {
        let mut value = Tensor::from_parts(t.shape().to_vec(), t.data().to_vec());
        value.requires_grad = true;
        self.leaf(value)
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad: requires_grad && self.grad_enabled,
        });
        Var(self.nodes.len() - 1)
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Records the result of a [`Function`] evaluated by the caller.
    pub fn custom(&mut self, inputs: &[Var], output: Tensor, f: Box<dyn Function>) -> Var {
        let rg = self.any_grad(inputs);
        self.push(output, Op::Custom(inputs.to_vec(), f), rg)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(FrwkvError::Dimension {
                op: "matmul",
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        gemm_acc(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(Tensor::from_parts(vec![m, n], out), Op::MatMul(a, b), rg))
    }

    /// `x[..., K] · w[K, N] -> [..., N]`.
    pub fn linear(&mut self, x: Var, w: Var) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let k = *xs.last().ok_or_else(|| FrwkvError::contract("linear on a scalar"))?;
        let rows = xs.iter().product::<usize>() / k.max(1);
        let flat = self.reshape(x, &[rows, k])?;
        let y = self.matmul(flat, w)?;
        let n = self.shape(w)[1];
        let mut ys = xs;
        *ys.last_mut().unwrap() = n;
        self.reshape(y, &ys)
    }

    fn broadcast_kind(&self, op: &'static str, a: Var, b: Var) -> Result<Broadcast> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa == sb {
            Ok(Broadcast::Same)
        } else if self.value(b).numel() == 1 {
            Ok(Broadcast::Scalar)
        } else if sb.len() == 1 && sa.last() == Some(&sb[0]) {
            Ok(Broadcast::Trailing)
        } else {
            Err(FrwkvError::Dimension {
                op,
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            })
        }
    }

    /// Elementwise binary op. `b` may match `a`, be a single value, or be a
    /// vector matching `a`'s last axis.
    pub fn binary(&mut self, op: BinaryOp, a: Var, b: Var) -> Result<Var> {
        let name = match op {
            BinaryOp::Add => "add",
            BinaryOp::Sub => "sub",
            BinaryOp::Mul => "mul",
            BinaryOp::Div => "div",
        };
        let bc = self.broadcast_kind(name, a, b)?;
        let av = self.value(a);
        let bv = self.value(b).data();
        let nb = bv.len();
        let f = |x: f64, y: f64| match op {
            BinaryOp::Add => x + y,
            BinaryOp::Sub => x - y,
            BinaryOp::Mul => x * y,
            BinaryOp::Div => x / y,
        };
        let out: Vec<f64> = av
            .data()
            .iter()
            .enumerate()
            .map(|(j, &x)| {
                let y = match bc {
                    Broadcast::Same => bv[j],
                    Broadcast::Scalar => bv[0],
                    Broadcast::Trailing => bv[j % nb],
                };
                f(x, y)
            })
            .collect();
        let shape = av.shape().to_vec();
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(Tensor::from_parts(shape, out), Op::Binary(op, a, b, bc), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Mul, a, b)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Div, a, b)
    }

    pub fn unary(&mut self, op: UnaryOp, x: Var) -> Var {
        let f: fn(f64) -> f64 = match op {
            UnaryOp::Sigmoid => sigmoid,
            UnaryOp::Tanh => f64::tanh,
            UnaryOp::Exp => f64::exp,
        };
        let xv = self.value(x);
        let out = Tensor::from_parts(xv.shape().to_vec(), xv.data().iter().map(|&v| f(v)).collect());
        let rg = self.any_grad(&[x]);
        self.push(out, Op::Unary(op, x), rg)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(UnaryOp::Sigmoid, x)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(UnaryOp::Tanh, x)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(UnaryOp::Exp, x)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let xv = self.value(x);
        let out = Tensor::from_parts(xv.shape().to_vec(), xv.data().iter().map(|v| v * c).collect());
        let rg = self.any_grad(&[x]);
        self.push(out, Op::Scale(x, c), rg)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(x).reshape(shape)?;
        let rg = self.any_grad(&[x]);
        Ok(self.push(out, Op::Reshape(x), rg))
    }

    pub fn transpose_last2(&mut self, x: Var) -> Result<Var> {
        if self.shape(x).len() < 2 {
            return Err(FrwkvError::contract("transpose_last2 needs rank >= 2"));
        }
        let out = self.value(x).transpose_last2();
        let rg = self.any_grad(&[x]);
        Ok(self.push(out, Op::TransposeLast2(x), rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let rg = self.any_grad(&[x]);
        self.push(Tensor::scalar(s), Op::SumAll(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let s = xv.data().iter().sum::<f64>() / xv.numel() as f64;
        let rg = self.any_grad(&[x]);
        self.push(Tensor::scalar(s), Op::MeanAll(x), rg)
    }

    /// Sums the last axis away: `[..., D] -> [...]`.
    pub fn sum_last(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let shape = xv.shape();
        let d = *shape.last().ok_or_else(|| FrwkvError::contract("sum_last on a scalar"))?;
        let out: Vec<f64> = xv.data().chunks(d.max(1)).map(|c| c.iter().sum()).collect();
        let out = Tensor::from_parts(shape[..shape.len() - 1].to_vec(), out);
        let rg = self.any_grad(&[x]);
        Ok(self.push(out, Op::SumLast(x), rg))
    }

    fn check_expand(&self, op: &'static str, x: Var, s: Var) -> Result<usize> {
        let (xs, ss) = (self.shape(x), self.shape(s));
        if xs.is_empty() || &xs[..xs.len() - 1] != ss {
            return Err(FrwkvError::Dimension {
                op,
                lhs: xs.to_vec(),
                rhs: ss.to_vec(),
            });
        }
        Ok(*xs.last().unwrap())
    }

    /// `x[..., D] * s[...]`, with `s` repeated along the last axis.
    pub fn mul_expand(&mut self, x: Var, s: Var) -> Result<Var> {
        let d = self.check_expand("mul_expand", x, s)?;
        let sv = self.value(s).data();
        let xv = self.value(x);
        let out: Vec<f64> = xv.data().iter().enumerate().map(|(j, v)| v * sv[j / d]).collect();
        let out = Tensor::from_parts(xv.shape().to_vec(), out);
        let rg = self.any_grad(&[x, s]);
        Ok(self.push(out, Op::MulExpand(x, s), rg))
    }

    /// `x[..., D] + s[...]`, with `s` repeated along the last axis.
    pub fn add_expand(&mut self, x: Var, s: Var) -> Result<Var> {
        let d = self.check_expand("add_expand", x, s)?;
        let sv = self.value(s).data();
        let xv = self.value(x);
        let out: Vec<f64> = xv.data().iter().enumerate().map(|(j, v)| v + sv[j / d]).collect();
        let out = Tensor::from_parts(xv.shape().to_vec(), out);
        let rg = self.any_grad(&[x, s]);
        Ok(self.push(out, Op::AddExpand(x, s), rg))
    }

    /// Scales every slice along the last axis to unit Euclidean norm.
    /// Norms below [`L2_EPS`] are replaced by it, so zero slices stay zero.
    pub fn l2_normalize_last(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let d = *xv.shape().last().ok_or_else(|| FrwkvError::contract("l2_normalize on a scalar"))?;
        let mut out = xv.data().to_vec();
        for chunk in out.chunks_mut(d.max(1)) {
            l2_normalize_in_place(chunk);
        }
        let out = Tensor::from_parts(xv.shape().to_vec(), out);
        let rg = self.any_grad(&[x]);
        Ok(self.push(out, Op::L2NormalizeLast(x), rg))
    }

    /// Zero-mean, unit-variance normalization over the last axis (no affine).
    pub fn layer_norm_last(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let d = *xv.shape().last().ok_or_else(|| FrwkvError::contract("layer_norm on a scalar"))?;
        let mut out = xv.data().to_vec();
        for chunk in out.chunks_mut(d.max(1)) {
            let n = chunk.len() as f64;
            let mean = chunk.iter().sum::<f64>() / n;
            let var = chunk.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            chunk.iter_mut().for_each(|v| *v = (*v - mean) * inv);
        }
        let out = Tensor::from_parts(xv.shape().to_vec(), out);
        let rg = self.any_grad(&[x]);
        Ok(self.push(out, Op::LayerNormLast(x), rg))
    }

    /// Shifts rows one step along axis −2: row `t` takes row `t−1`, the
    /// first row becomes zero. Leading axes are independent sequences.
    pub fn token_shift(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let s = xv.shape();
        if s.len() < 2 {
            return Err(FrwkvError::contract("token_shift needs [..., L, C]"));
        }
        let (l, c) = (s[s.len() - 2], s[s.len() - 1]);
        let mut out = vec![0.0; xv.numel()];
        for (dst, src) in out.chunks_mut(l * c).zip(xv.data().chunks(l * c)) {
            dst[c..].copy_from_slice(&src[..(l - 1) * c]);
        }
        let out = Tensor::from_parts(s.to_vec(), out);
        let rg = self.any_grad(&[x]);
        Ok(self.push(out, Op::TokenShift(x), rg))
    }

    /// Reverse sweep from a scalar `loss`. Gradients from multiple uses of
    /// a node accumulate additively.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).numel() != 1 {
            return Err(FrwkvError::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        self.grads = vec![None; self.nodes.len()];
        self.grads[loss.0] = Some(vec![1.0]);
        self.last_visits = 0;
        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let Some(g) = self.grads[idx].take() else { continue };
            if !matches!(self.nodes[idx].op, Op::Leaf) {
                self.last_visits += 1;
                for (input, contrib) in self.vjp(idx, &g) {
                    if !self.nodes[input.0].requires_grad {
                        continue;
                    }
                    match &mut self.grads[input.0] {
                        Some(acc) => acc.iter_mut().zip(&contrib).for_each(|(a, c)| *a += c),
                        slot @ None => *slot = Some(contrib),
                    }
                }
            }
            self.grads[idx] = Some(g);
        }
        Ok(())
    }

    fn vjp(&self, idx: usize, g: &[f64]) -> Vec<(Var, Vec<f64>)> {
        let node = &self.nodes[idx];
        let out = &node.value;
        let val = |v: Var| &self.nodes[v.0].value;
        let wants = |v: Var| self.nodes[v.0].requires_grad;
        let mut res = Vec::new();
        match &node.op {
            Op::Leaf => {}
            &Op::MatMul(a, b) => {
                let (av, bv) = (val(a), val(b));
                let (m, k, n) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
                if wants(a) {
                    let mut ga = vec![0.0; m * k];
                    gemm_nt_acc(g, bv.data(), &mut ga, m, n, k);
                    res.push((a, ga));
                }
                if wants(b) {
                    let mut gb = vec![0.0; k * n];
                    gemm_tn_acc(av.data(), g, &mut gb, k, m, n);
                    res.push((b, gb));
                }
            }
            &Op::Binary(op, a, b, bc) => {
                let (av, bv) = (val(a).data(), val(b).data());
                let nb = bv.len();
                let bidx = |j: usize| match bc {
                    Broadcast::Same => j,
                    Broadcast::Scalar => 0,
                    Broadcast::Trailing => j % nb,
                };
                if wants(a) {
                    let ga: Vec<f64> = match op {
                        BinaryOp::Add | BinaryOp::Sub => g.to_vec(),
                        BinaryOp::Mul => g.iter().enumerate().map(|(j, gj)| gj * bv[bidx(j)]).collect(),
                        BinaryOp::Div => g.iter().enumerate().map(|(j, gj)| gj / bv[bidx(j)]).collect(),
                    };
                    res.push((a, ga));
                }
                if wants(b) {
                    let mut gb = vec![0.0; nb];
                    for (j, gj) in g.iter().enumerate() {
                        let bj = bidx(j);
                        gb[bj] += match op {
                            BinaryOp::Add => *gj,
                            BinaryOp::Sub => -gj,
                            BinaryOp::Mul => gj * av[j],
                            BinaryOp::Div => -gj * av[j] / (bv[bj] * bv[bj]),
                        };
                    }
                    res.push((b, gb));
                }
            }
            &Op::Unary(op, x) => {
                let xv = val(x).data();
                let y = out.data();
                let gx = g
                    .iter()
                    .enumerate()
                    .map(|(j, gj)| {
                        gj * match op {
                            UnaryOp::Sigmoid => y[j] * (1.0 - y[j]),
                            UnaryOp::Tanh => 1.0 - y[j] * y[j],
                            UnaryOp::Exp => y[j],
                        }
                    })
                    .collect();
                let _ = xv;
                res.push((x, gx));
            }
            &Op::Scale(x, c) => res.push((x, g.iter().map(|v| v * c).collect())),
            &Op::Reshape(x) => res.push((x, g.to_vec())),
            &Op::TransposeLast2(x) => {
                let gt = Tensor::from_parts(out.shape().to_vec(), g.to_vec()).transpose_last2();
                res.push((x, gt.into_data()));
            }
            &Op::SumAll(x) => res.push((x, vec![g[0]; val(x).numel()])),
            &Op::MeanAll(x) => {
                let n = val(x).numel();
                res.push((x, vec![g[0] / n as f64; n]));
            }
            &Op::SumLast(x) => {
                let d = *val(x).shape().last().unwrap();
                res.push((x, (0..val(x).numel()).map(|j| g[j / d]).collect()));
            }
            &Op::MulExpand(x, s) => {
                let (xv, sv) = (val(x).data(), val(s).data());
                let d = *val(x).shape().last().unwrap();
                if wants(x) {
                    res.push((x, g.iter().enumerate().map(|(j, gj)| gj * sv[j / d]).collect()));
                }
                if wants(s) {
                    let mut gs = vec![0.0; sv.len()];
                    for (j, gj) in g.iter().enumerate() {
                        gs[j / d] += gj * xv[j];
                    }
                    res.push((s, gs));
                }
            }
            &Op::AddExpand(x, s) => {
                let d = *val(x).shape().last().unwrap();
                if wants(x) {
                    res.push((x, g.to_vec()));
                }
                if wants(s) {
                    let gs = g.chunks(d).map(|c| c.iter().sum()).collect();
                    res.push((s, gs));
                }
            }
            &Op::L2NormalizeLast(x) => {
                let xv = val(x).data();
                let d = *val(x).shape().last().unwrap();
                let mut gx = vec![0.0; xv.len()];
                for ((gxc, xc), gc) in gx.chunks_mut(d).zip(xv.chunks(d)).zip(g.chunks(d)) {
                    let n = xc.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let q = n.max(L2_EPS);
                    let gdotx: f64 = gc.iter().zip(xc).map(|(a, b)| a * b).sum();
                    for j in 0..d {
                        gxc[j] = gc[j] / q;
                        if n > L2_EPS {
                            gxc[j] -= gdotx * xc[j] / (n * n * n);
                        }
                    }
                }
                res.push((x, gx));
            }
            &Op::LayerNormLast(x) => {
                let xv = val(x).data();
                let y = out.data();
                let d = *val(x).shape().last().unwrap();
                let mut gx = vec![0.0; xv.len()];
                for c in 0..xv.len() / d {
                    let r = c * d..(c + 1) * d;
                    let xc = &xv[r.clone()];
                    let n = d as f64;
                    let mean = xc.iter().sum::<f64>() / n;
                    let var = xc.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                    let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
                    let (gc, yc) = (&g[r.clone()], &y[r.clone()]);
                    let gmean = gc.iter().sum::<f64>() / n;
                    let gymean = gc.iter().zip(yc).map(|(a, b)| a * b).sum::<f64>() / n;
                    for j in 0..d {
                        gx[c * d + j] = inv * (gc[j] - gmean - yc[j] * gymean);
                    }
                }
                res.push((x, gx));
            }
            &Op::TokenShift(x) => {
                let s = val(x).shape();
                let (l, c) = (s[s.len() - 2], s[s.len() - 1]);
                let mut gx = vec![0.0; g.len()];
                for (dst, src) in gx.chunks_mut(l * c).zip(g.chunks(l * c)) {
                    dst[..(l - 1) * c].copy_from_slice(&src[c..]);
                }
                res.push((x, gx));
            }
            Op::Custom(inputs, f) => {
                let ins: Vec<&Tensor> = inputs.iter().map(|&v| val(v)).collect();
                for (&v, gi) in inputs.iter().zip(f.backward(&ins, out, g)) {
                    if let Some(gi) = gi {
                        res.push((v, gi));
                    }
                }
            }
        }
        res
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// In-place `x / (‖x‖ + ε)`.
pub fn l2_normalize_in_place(x: &mut [f64]) {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let q = n.max(L2_EPS);
    x.iter_mut().for_each(|v| *v /= q);
}

/// Non-recording `l2_normalize` over the last axis.
pub fn l2_normalize(x: &Tensor) -> Tensor {
    let d = x.shape().last().copied().unwrap_or(1).max(1);
    let mut out = x.data().to_vec();
    out.chunks_mut(d).for_each(l2_normalize_in_place);
    Tensor::from_parts(x.shape().to_vec(), out)
}

/// Non-recording matrix product.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::inference();
    let (va, vb) = (tape.constant(a.clone()), tape.constant(b.clone()));
    let out = tape.matmul(va, vb)?;
    Ok(tape.value(out).clone())
}
