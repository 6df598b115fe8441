//! Matrix-level reverse-mode differentiation.
//!
//! A [`Graph`] records one forward pass. Every node holds a rank-2 value;
//! operations that involve any node requiring gradients remember their
//! inputs so that [`Graph::backward`] can propagate adjoints in reverse
//! insertion order. A graph is built per forward pass and dropped after
//! the backward pass.

use std::collections::BTreeMap;
use std::ops::Index;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::ops::{gemm, layer_norm_row, softmax_in_place, Activation};
use crate::numerics::params::{ParamId, ParamStore};
use crate::numerics::Tensor;

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Unary {
    Act(Activation),
    Exp,
    Ln,
    Sqrt,
    Square,
    /// `max(x, c)`.
    ClampMin(f64),
}

impl Unary {
    fn apply(self, x: f64) -> f64 {
        match self {
            Unary::Act(a) => a.apply(x),
            Unary::Exp => x.exp(),
            Unary::Ln => x.ln(),
            Unary::Sqrt => x.sqrt(),
            Unary::Square => x * x,
            Unary::ClampMin(c) => x.max(c),
        }
    }

    /// Derivative given input `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Unary::Act(a) => a.derivative(x),
            Unary::Exp => y,
            Unary::Ln => 1.0 / x,
            Unary::Sqrt => 0.5 / y,
            Unary::Square => 2.0 * x,
            Unary::ClampMin(c) => {
                if x > c {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    BlockMatMul {
        a: Var,
        b: Var,
        blocks: usize,
        trans_b: bool,
    },
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, f64),
    Offset(Var),
    Unary(Var, Unary),
    SoftmaxRows(Var),
    LayerNormRows(Var, f64),
    SumAll(Var),
    SumRows(Var),
    SumCols(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    GatherRows(Var, Arc<Vec<usize>>),
    Reshape(Var),
}

struct Node {
    value: Arc<Tensor>,
    op: Op,
    needs_grad: bool,
}

/// Variables bound from a [`ParamStore`], indexable by [`ParamId`].
#[derive(Clone, Debug)]
pub struct Bound {
    vars: Vec<Var>,
}

impl Index<ParamId> for Bound {
    type Output = Var;

    fn index(&self, id: ParamId) -> &Var {
        &self.vars[id.index()]
    }
}

impl Bound {
    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

/// Adjoints produced by [`Graph::backward`].
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<[usize; 2]>,
}

impl Gradients {
    /// Gradient with respect to `v`; zeros when `v` did not influence the loss.
    pub fn get(&self, v: Var) -> Tensor {
        let [r, c] = self.shapes[v.0];
        match &self.grads[v.0] {
            Some(g) => Tensor::from_raw(r, c, g.clone()),
            None => Tensor::zeros(r, c),
        }
    }

    /// Gradients for every entry of `store`, aligned with its ids.
    pub fn for_params(&self, bound: &Bound) -> Vec<Tensor> {
        bound.vars.iter().map(|&v| self.get(v)).collect()
    }

    /// Gradient map keyed by parameter name.
    pub fn by_name(&self, bound: &Bound, store: &ParamStore) -> BTreeMap<String, Tensor> {
        store
            .names()
            .iter()
            .zip(&bound.vars)
            .map(|(name, &v)| (name.clone(), self.get(v)))
            .collect()
    }
}

pub struct Graph {
    nodes: Vec<Node>,
    grad_enabled: bool,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

fn dims(t: &Tensor) -> [usize; 2] {
    [t.rows(), t.cols()]
}

impl Graph {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grad_enabled: true,
        }
    }

    /// A graph that never records backward information.
    pub fn inference() -> Self {
        Self {
            nodes: Vec::new(),
            grad_enabled: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let needs_grad = self.grad_enabled && inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        let op = if needs_grad { op } else { Op::Leaf };
        self.nodes.push(Node {
            value: Arc::new(value),
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn leaf(&mut self, value: Arc<Tensor>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: needs_grad && self.grad_enabled,
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf that participates in differentiation.
    pub fn variable(&mut self, value: Tensor) -> Var {
        self.leaf(Arc::new(value), true)
    }

    /// Leaf excluded from differentiation.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(Arc::new(value), false)
    }

    /// Binds every tensor of `store` as a differentiable leaf. Values are
    /// shared, not copied.
    pub fn bind(&mut self, store: &ParamStore) -> Bound {
        let vars = store
            .shared_tensors()
            .iter()
            .map(|t| {
                let grad = t.requires_grad();
                self.leaf(Arc::clone(t), grad)
            })
            .collect();
        Bound { vars }
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> [usize; 2] {
        dims(&self.nodes[v.0].value)
    }

    fn data(&self, v: Var) -> &[f64] {
        self.nodes[v.0].value.data()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let [m, k] = self.shape(a);
        let [k2, n] = self.shape(b);
        if k != k2 {
            return Err(Error::shape("matmul", &[m, k], &[k2, n]));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, self.data(a), false, self.data(b), false, &mut out, false);
        Ok(self.push(Tensor::from_raw(m, n, out), Op::MatMul(a, b), &[a, b]))
    }

    /// Block-diagonal product: `a` stacks `blocks` matrices of `m×k`, `b`
    /// stacks `blocks` matrices of `k×n` (or `n×k` when `trans_b`), and the
    /// result stacks the per-block products.
    pub fn block_matmul(&mut self, a: Var, b: Var, blocks: usize, trans_b: bool) -> Result<Var> {
        let [ar, k] = self.shape(a);
        let [br, bc] = self.shape(b);
        if blocks == 0 || ar % blocks != 0 || br % blocks != 0 {
            return Err(Error::shape("block_matmul", &[ar, k], &[br, bc]));
        }
        let m = ar / blocks;
        let (kb, n) = if trans_b { (bc, br / blocks) } else { (br / blocks, bc) };
        if kb != k {
            return Err(Error::shape("block_matmul", &[ar, k], &[br, bc]));
        }
        let mut out = vec![0.0; blocks * m * n];
        let (ad, bd) = (self.data(a), self.data(b));
        let bsz = (br / blocks) * bc;
        for blk in 0..blocks {
            gemm(
                m,
                k,
                n,
                &ad[blk * m * k..(blk + 1) * m * k],
                false,
                &bd[blk * bsz..(blk + 1) * bsz],
                trans_b,
                &mut out[blk * m * n..(blk + 1) * m * n],
                false,
            );
        }
        Ok(self.push(
            Tensor::from_raw(blocks * m, n, out),
            Op::BlockMatMul {
                a,
                b,
                blocks,
                trans_b,
            },
            &[a, b],
        ))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let t = self.value(a).transpose();
        self.push(t, Op::Transpose(a), &[a])
    }

    fn broadcast_check(&self, op: &'static str, a: Var, b: Var) -> Result<([usize; 2], [usize; 2])> {
        let sa = self.shape(a);
        let sb = self.shape(b);
        let ok = (sb[0] == sa[0] || sb[0] == 1) && (sb[1] == sa[1] || sb[1] == 1);
        if ok {
            Ok((sa, sb))
        } else {
            Err(Error::shape(op, &sa, &sb))
        }
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        let ([r, c], sb) = self.broadcast_check(name, a, b)?;
        let (ad, bd) = (self.data(a), self.data(b));
        let mut out = Vec::with_capacity(r * c);
        for i in 0..r {
            let bi = if sb[0] == 1 { 0 } else { i };
            for j in 0..c {
                let bj = if sb[1] == 1 { 0 } else { j };
                out.push(f(ad[i * c + j], bd[bi * sb[1] + bj]));
            }
        }
        Ok(self.push(Tensor::from_raw(r, c, out), op, &[a, b]))
    }

    /// `a + b`, with `b` broadcast along any unit dimension.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("div", a, b, |x, y| x / y, Op::Div(a, b))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let t = self.value(a).map(|v| v * s);
        self.push(t, Op::Scale(a, s), &[a])
    }

    pub fn offset(&mut self, a: Var, s: f64) -> Var {
        let t = self.value(a).map(|v| v + s);
        self.push(t, Op::Offset(a), &[a])
    }

    pub fn unary(&mut self, a: Var, f: Unary) -> Var {
        let t = self.value(a).map(|v| f.apply(v));
        self.push(t, Op::Unary(a, f), &[a])
    }

    pub fn activation(&mut self, a: Var, kind: Activation) -> Var {
        self.unary(a, Unary::Act(kind))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let [r, c] = self.shape(a);
        let mut out = self.data(a).to_vec();
        for row in out.chunks_mut(c.max(1)) {
            softmax_in_place(row);
        }
        self.push(Tensor::from_raw(r, c, out), Op::SoftmaxRows(a), &[a])
    }

    pub fn layer_norm_rows(&mut self, a: Var, eps: f64) -> Result<Var> {
        let [r, c] = self.shape(a);
        if c < 2 {
            return Err(Error::InvalidArgument(format!(
                "layer norm needs at least 2 features, got {c}"
            )));
        }
        let mut out = vec![0.0; r * c];
        let src = self.data(a);
        for i in 0..r {
            layer_norm_row(&src[i * c..(i + 1) * c], &mut out[i * c..(i + 1) * c], eps);
        }
        Ok(self.push(Tensor::from_raw(r, c, out), Op::LayerNormRows(a, eps), &[a]))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.push(Tensor::scalar(s), Op::SumAll(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// Sums each row, giving an `r×1` column.
    pub fn sum_rows(&mut self, a: Var) -> Var {
        let [r, c] = self.shape(a);
        let out = self.data(a).chunks(c.max(1)).map(|row| row.iter().sum()).collect();
        let out = if c == 0 { vec![0.0; r] } else { out };
        self.push(Tensor::from_raw(r, 1, out), Op::SumRows(a), &[a])
    }

    /// Sums each column, giving a `1×c` row.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let [r, c] = self.shape(a);
        let mut out = vec![0.0; c];
        let d = self.data(a);
        for i in 0..r {
            for j in 0..c {
                out[j] += d[i * c + j];
            }
        }
        self.push(Tensor::from_raw(1, c, out), Op::SumCols(a), &[a])
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let r = self.shape(parts[0])[0];
        let mut total = 0;
        for &p in parts {
            let s = self.shape(p);
            if s[0] != r {
                return Err(Error::shape("concat_cols", &[r], &s));
            }
            total += s[1];
        }
        let mut out = Vec::with_capacity(r * total);
        for i in 0..r {
            for &p in parts {
                let c = self.shape(p)[1];
                out.extend_from_slice(&self.data(p)[i * c..(i + 1) * c]);
            }
        }
        Ok(self.push(Tensor::from_raw(r, total, out), Op::ConcatCols(parts.to_vec()), parts))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let c = self.shape(parts[0])[1];
        let mut rows = 0;
        let mut out = Vec::new();
        for &p in parts {
            let s = self.shape(p);
            if s[1] != c {
                return Err(Error::shape("concat_rows", &[c], &s));
            }
            rows += s[0];
            out.extend_from_slice(self.data(p));
        }
        Ok(self.push(Tensor::from_raw(rows, c, out), Op::ConcatRows(parts.to_vec()), parts))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let [r, c] = self.shape(a);
        if start + len > c {
            return Err(Error::shape("slice_cols", &[r, c], &[start, len]));
        }
        let d = self.data(a);
        let mut out = Vec::with_capacity(r * len);
        for i in 0..r {
            out.extend_from_slice(&d[i * c + start..i * c + start + len]);
        }
        Ok(self.push(Tensor::from_raw(r, len, out), Op::SliceCols(a, start), &[a]))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let [r, c] = self.shape(a);
        if start + len > r {
            return Err(Error::shape("slice_rows", &[r, c], &[start, len]));
        }
        let out = self.data(a)[start * c..(start + len) * c].to_vec();
        Ok(self.push(Tensor::from_raw(len, c, out), Op::SliceRows(a, start), &[a]))
    }

    /// Row `k` of the result is row `index[k]` of `a`.
    pub fn gather_rows(&mut self, a: Var, index: Arc<Vec<usize>>) -> Result<Var> {
        let [r, c] = self.shape(a);
        if let Some(&bad) = index.iter().find(|&&i| i >= r) {
            return Err(Error::shape("gather_rows", &[r, c], &[bad]));
        }
        let d = self.data(a);
        let mut out = Vec::with_capacity(index.len() * c);
        for &i in index.iter() {
            out.extend_from_slice(&d[i * c..(i + 1) * c]);
        }
        Ok(self.push(Tensor::from_raw(index.len(), c, out), Op::GatherRows(a, index), &[a]))
    }

    /// Row-major reinterpretation.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let t = self.value(a).reshaped(rows, cols)?;
        Ok(self.push(t, Op::Reshape(a), &[a]))
    }

    /// Reverse pass from a `1×1` loss.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let shapes: Vec<[usize; 2]> = self.nodes.iter().map(|n| dims(&n.value)).collect();
        if shapes[loss.0] != [1, 1] {
            return Err(Error::shape("backward", &shapes[loss.0], &[1, 1]));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads, shapes })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn propagate(&self, idx: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[idx];
        let [r, c] = dims(&node.value);
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let [m, k] = self.shape(*a);
                let n = c;
                if self.wants(*a) {
                    let dst = slot(grads, *a, m * k);
                    gemm(m, n, k, g, false, self.data(*b), true, dst, true);
                }
                if self.wants(*b) {
                    let dst = slot(grads, *b, k * n);
                    gemm(k, m, n, self.data(*a), true, g, false, dst, true);
                }
            }
            Op::BlockMatMul {
                a,
                b,
                blocks,
                trans_b,
            } => {
                let [ar, k] = self.shape(*a);
                let [br, bc] = self.shape(*b);
                let m = ar / blocks;
                let n = c;
                let bsz = (br / blocks) * bc;
                if self.wants(*a) {
                    let bd = self.data(*b);
                    let dst = slot(grads, *a, ar * k);
                    for blk in 0..*blocks {
                        // dA = dC · op(B)ᵀ
                        gemm(
                            m,
                            n,
                            k,
                            &g[blk * m * n..(blk + 1) * m * n],
                            false,
                            &bd[blk * bsz..(blk + 1) * bsz],
                            !trans_b,
                            &mut dst[blk * m * k..(blk + 1) * m * k],
                            true,
                        );
                    }
                }
                if self.wants(*b) {
                    let ad = self.data(*a);
                    let dst = slot(grads, *b, br * bc);
                    for blk in 0..*blocks {
                        let ga = &ad[blk * m * k..(blk + 1) * m * k];
                        let gc = &g[blk * m * n..(blk + 1) * m * n];
                        let out = &mut dst[blk * bsz..(blk + 1) * bsz];
                        if *trans_b {
                            // C = A Bᵀ  =>  dB = dCᵀ A  (n×k)
                            gemm(n, m, k, gc, true, ga, false, out, true);
                        } else {
                            // dB = Aᵀ dC  (k×n)
                            gemm(k, m, n, ga, true, gc, false, out, true);
                        }
                    }
                }
            }
            Op::Transpose(a) => {
                let dst = slot(grads, *a, r * c);
                // node is r×c, input is c×r
                for i in 0..r {
                    for j in 0..c {
                        dst[j * r + i] += g[i * c + j];
                    }
                }
            }
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                if self.wants(*a) {
                    let dst = slot(grads, *a, r * c);
                    for (d, v) in dst.iter_mut().zip(g) {
                        *d += v;
                    }
                }
                if self.wants(*b) {
                    let sb = self.shape(*b);
                    let dst = slot(grads, *b, sb[0] * sb[1]);
                    for i in 0..r {
                        let bi = if sb[0] == 1 { 0 } else { i };
                        for j in 0..c {
                            let bj = if sb[1] == 1 { 0 } else { j };
                            dst[bi * sb[1] + bj] += sign * g[i * c + j];
                        }
                    }
                }
            }
            Op::Mul(a, b) | Op::Div(a, b) => {
                let is_div = matches!(node.op, Op::Div(..));
                let sb = self.shape(*b);
                let (ad, bd) = (self.data(*a), self.data(*b));
                let bat = |i: usize, j: usize| {
                    let bi = if sb[0] == 1 { 0 } else { i };
                    let bj = if sb[1] == 1 { 0 } else { j };
                    bi * sb[1] + bj
                };
                if self.wants(*a) {
                    let dst = slot(grads, *a, r * c);
                    for i in 0..r {
                        for j in 0..c {
                            let bv = bd[bat(i, j)];
                            dst[i * c + j] += if is_div {
                                g[i * c + j] / bv
                            } else {
                                g[i * c + j] * bv
                            };
                        }
                    }
                }
                if self.wants(*b) {
                    let dst = slot(grads, *b, sb[0] * sb[1]);
                    for i in 0..r {
                        for j in 0..c {
                            let k = bat(i, j);
                            let av = ad[i * c + j];
                            dst[k] += if is_div {
                                -g[i * c + j] * av / (bd[k] * bd[k])
                            } else {
                                g[i * c + j] * av
                            };
                        }
                    }
                }
            }
            Op::Scale(a, s) => {
                let dst = slot(grads, *a, r * c);
                for (d, v) in dst.iter_mut().zip(g) {
                    *d += s * v;
                }
            }
            Op::Offset(a) => {
                let dst = slot(grads, *a, r * c);
                for (d, v) in dst.iter_mut().zip(g) {
                    *d += v;
                }
            }
            Op::Unary(a, f) => {
                let x = self.data(*a);
                let y = node.value.data();
                let dst = slot(grads, *a, r * c);
                for i in 0..r * c {
                    dst[i] += g[i] * f.derivative(x[i], y[i]);
                }
            }
            Op::SoftmaxRows(a) => {
                let y = node.value.data();
                let dst = slot(grads, *a, r * c);
                for i in 0..r {
                    let row = i * c..(i + 1) * c;
                    let dot: f64 = y[row.clone()].iter().zip(&g[row.clone()]).map(|(p, q)| p * q).sum();
                    for k in row {
                        dst[k] += y[k] * (g[k] - dot);
                    }
                }
            }
            Op::LayerNormRows(a, eps) => {
                let x = self.data(*a);
                let y = node.value.data();
                let dst = slot(grads, *a, r * c);
                let d = c as f64;
                for i in 0..r {
                    let xs = &x[i * c..(i + 1) * c];
                    let mean = xs.iter().sum::<f64>() / d;
                    let var = xs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
                    let inv = 1.0 / (var + eps).sqrt();
                    let gs = &g[i * c..(i + 1) * c];
                    let ys = &y[i * c..(i + 1) * c];
                    let mg = gs.iter().sum::<f64>() / d;
                    let mgy = gs.iter().zip(ys).map(|(p, q)| p * q).sum::<f64>() / d;
                    for k in 0..c {
                        dst[i * c + k] += inv * (gs[k] - mg - ys[k] * mgy);
                    }
                }
            }
            Op::SumAll(a) => {
                let n = self.value(*a).len();
                let dst = slot(grads, *a, n);
                for d in dst.iter_mut() {
                    *d += g[0];
                }
            }
            Op::SumRows(a) => {
                let [ar, ac] = self.shape(*a);
                let dst = slot(grads, *a, ar * ac);
                for i in 0..ar {
                    for j in 0..ac {
                        dst[i * ac + j] += g[i];
                    }
                }
            }
            Op::SumCols(a) => {
                let [ar, ac] = self.shape(*a);
                let dst = slot(grads, *a, ar * ac);
                for i in 0..ar {
                    for j in 0..ac {
                        dst[i * ac + j] += g[j];
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let pc = self.shape(p)[1];
                    if self.wants(p) {
                        let dst = slot(grads, p, r * pc);
                        for i in 0..r {
                            for j in 0..pc {
                                dst[i * pc + j] += g[i * c + offset + j];
                            }
                        }
                    }
                    offset += pc;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let n = self.value(p).len();
                    if self.wants(p) {
                        let dst = slot(grads, p, n);
                        for (d, v) in dst.iter_mut().zip(&g[offset..offset + n]) {
                            *d += v;
                        }
                    }
                    offset += n;
                }
            }
            Op::SliceCols(a, start) => {
                let [ar, ac] = self.shape(*a);
                let dst = slot(grads, *a, ar * ac);
                for i in 0..r {
                    for j in 0..c {
                        dst[i * ac + start + j] += g[i * c + j];
                    }
                }
            }
            Op::SliceRows(a, start) => {
                let [ar, ac] = self.shape(*a);
                let dst = slot(grads, *a, ar * ac);
                for (d, v) in dst[start * ac..(start + r) * ac].iter_mut().zip(g) {
                    *d += v;
                }
            }
            Op::GatherRows(a, index) => {
                let [ar, ac] = self.shape(*a);
                let dst = slot(grads, *a, ar * ac);
                for (k, &src) in index.iter().enumerate() {
                    for j in 0..ac {
                        dst[src * ac + j] += g[k * ac + j];
                    }
                }
            }
            Op::Reshape(a) => {
                let n = r * c;
                let dst = slot(grads, *a, n);
                for (d, v) in dst.iter_mut().zip(g) {
                    *d += v;
                }
            }
        }
    }
}

fn slot(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut [f64] {
    grads[v.0].get_or_insert_with(|| vec![0.0; len])
}
