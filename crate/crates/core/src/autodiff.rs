//! Reverse-mode differentiation over a recorded tape of tensor operators.
//!
//! Each call on [`Tape`] evaluates one operator eagerly and appends a node;
//! [`Tape::backward`] walks the nodes in reverse and accumulates
//! `∂loss/∂node` for every node that depends on a differentiable leaf.

use crate::error::{Error, Result};
use crate::ops::{self, ConvGeom, LayerNormCache};
use crate::rng::RngStream;
use crate::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf,
    Conv { x: Var, w: Var, b: Var, geom: ConvGeom },
    LayerNorm { x: Var, gamma: Var, beta: Var, cache: LayerNormCache },
    Relu { x: Var },
    Dropout { x: Var, mask: Vec<f64> },
    Add { a: Var, b: Var },
    Sub { a: Var, b: Var },
    Mul { a: Var, b: Var },
    TakeLast { x: Var, len: usize, keep: usize },
    Dense { x: Var, w: Var, b: Var, rows: usize, c: usize, d: usize },
    Sum { x: Var },
    Mean { x: Var },
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
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

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// A differentiable leaf (a trainable parameter).
    pub fn param(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// A non-differentiable leaf (data, targets).
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    pub fn causal_conv1d(&mut self, x: Var, w: Var, b: Var, dilation: usize, keep: usize) -> Result<Var> {
        let (xt, wt, bt) = (self.value(x), self.value(w), self.value(b));
        let geom = ConvGeom::check(xt, wt, bt, dilation, keep)?;
        let out = ops::conv_forward(&geom, xt.data(), wt.data(), bt.data());
        let value = Tensor::from_parts(ops::seq_shape(xt, keep, geom.cout), out);
        value.ensure_finite("causal_conv1d")?;
        let needs = self.needs(x) || self.needs(w) || self.needs(b);
        Ok(self.push(value, Op::Conv { x, w, b, geom }, needs))
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let (xt, gt, bt) = (self.value(x), self.value(gamma), self.value(beta));
        let c = ops::check_layer_norm(xt, gt, bt, eps)?;
        let (out, cache) = ops::layer_norm_forward(xt.data(), c, gt.data(), bt.data(), eps);
        let value = Tensor::from_parts(xt.shape().to_vec(), out);
        value.ensure_finite("layer_norm")?;
        let needs = self.needs(x) || self.needs(gamma) || self.needs(beta);
        Ok(self.push(value, Op::LayerNorm { x, gamma, beta, cache }, needs))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = ops::relu(self.value(x));
        let needs = self.needs(x);
        self.push(value, Op::Relu { x }, needs)
    }

    /// Inverted dropout with a freshly drawn mask. With `rate == 0` the input
    /// node is returned unchanged and no draws are taken.
    pub fn dropout(&mut self, x: Var, rate: f64, rng: &mut RngStream) -> Result<Var> {
        ops::check_rate(rate)?;
        if rate == 0.0 {
            return Ok(x);
        }
        let xt = self.value(x);
        let mask = ops::dropout_mask(xt.numel(), rate, rng);
        let data = xt.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let value = Tensor::from_parts(xt.shape().to_vec(), data);
        let needs = self.needs(x);
        Ok(self.push(value, Op::Dropout { x, mask }, needs))
    }

    fn binary(&mut self, a: Var, b: Var, name: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (at, bt) = (self.value(a), self.value(b));
        if at.shape() != bt.shape() {
            return Err(Error::shape(name, format!("{:?} vs {:?}", at.shape(), bt.shape())));
        }
        let data = at.data().iter().zip(bt.data()).map(|(&x, &y)| f(x, y)).collect();
        Ok(Tensor::from_parts(at.shape().to_vec(), data))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.binary(a, b, "add", |x, y| x + y)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Add { a, b }, needs))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.binary(a, b, "sub", |x, y| x - y)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Sub { a, b }, needs))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.binary(a, b, "mul", |x, y| x * y)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Mul { a, b }, needs))
    }

    /// Keep the last `keep` time steps of a sequence tensor.
    pub fn take_last(&mut self, x: Var, keep: usize) -> Result<Var> {
        let xt = self.value(x);
        let (batch, len, c) = ops::seq_dims(xt, "take_last")?;
        if keep == 0 || keep > len {
            return Err(Error::shape("take_last", format!("keep {} outside 1..={}", keep, len)));
        }
        if keep == len {
            return Ok(x);
        }
        let mut data = Vec::with_capacity(batch * keep * c);
        for b in 0..batch {
            data.extend_from_slice(&xt.data()[(b * len + len - keep) * c..(b + 1) * len * c]);
        }
        let value = Tensor::from_parts(ops::seq_shape(xt, keep, c), data);
        let needs = self.needs(x);
        Ok(self.push(value, Op::TakeLast { x, len, keep }, needs))
    }

    /// Features at the final time step: `[B×T×C] → [B×C]`, `[T×C] → [C]`.
    pub fn splice(&mut self, x: Var) -> Result<Var> {
        let rank = self.value(x).rank();
        let last = self.take_last(x, 1)?;
        let t = self.value(last).clone();
        let c = t.last_dim();
        let shape = if rank == 3 { vec![t.shape()[0], c] } else { vec![c] };
        // Same storage, lower rank; the gradient passes straight through.
        let value = t.reshape(&shape)?;
        let needs = self.needs(last);
        Ok(self.push(value, Op::TakeLast { x: last, len: 1, keep: 1 }, needs))
    }

    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xt, wt, bt) = (self.value(x), self.value(w), self.value(b));
        let (rows, c, d) = ops::check_dense(xt, wt, bt)?;
        let out = ops::dense_forward(rows, c, d, xt.data(), wt.data(), bt.data());
        let shape = if xt.rank() == 1 { vec![d] } else { vec![rows, d] };
        let value = Tensor::from_parts(shape, out);
        value.ensure_finite("dense")?;
        let needs = self.needs(x) || self.needs(w) || self.needs(b);
        Ok(self.push(value, Op::Dense { x, w, b, rows, c, d }, needs))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let value = Tensor::scalar(self.value(x).data().iter().sum());
        let needs = self.needs(x);
        self.push(value, Op::Sum { x }, needs)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let value = Tensor::scalar(t.data().iter().sum::<f64>() / t.numel() as f64);
        let needs = self.needs(x);
        self.push(value, Op::Mean { x }, needs)
    }

    /// Mean squared error between two same-sized tensors (shapes may differ).
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var> {
        let shape = self.value(pred).shape().to_vec();
        let target = if self.value(target).shape() == shape.as_slice() {
            target
        } else {
            let t = self.value(target).clone().reshape(&shape)?;
            self.constant(t)
        };
        let diff = self.sub(pred, target)?;
        let sq = self.mul(diff, diff)?;
        Ok(self.mean(sq))
    }

    /// Propagate `∂loss/∂·` from a scalar `loss` node back to every leaf.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if loss.0 >= self.nodes.len() {
            return Err(Error::Autodiff("backward called before a loss was recorded on this tape".into()));
        }
        if self.nodes[loss.0].value.numel() != 1 {
            return Err(Error::Autodiff(format!(
                "loss must be a scalar, got shape {:?}",
                self.nodes[loss.0].value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            // Hands out a zero-initialised accumulation buffer for `v`, or None if `v` needs no gradient.
            macro_rules! slot {
                ($v:expr) => {{
                    let v: Var = $v;
                    if self.nodes[v.0].needs_grad {
                        Some(grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.numel()]) as *mut Vec<f64>)
                    } else {
                        None
                    }
                }};
            }
            // SAFETY: every operator's operands are distinct earlier nodes, except
            // Add/Sub/Mul where `a == b` is handled by accumulating sequentially
            // through one pointer at a time; no two live &mut alias.
            unsafe {
                match &node.op {
                    Op::Leaf => {
                        grads[i] = Some(g);
                    }
                    Op::Conv { x, w, b, geom } => {
                        let xv = self.value(*x).data();
                        let wv = self.value(*w).data();
                        let dx = slot!(*x);
                        let dw = slot!(*w);
                        let db = slot!(*b);
                        ops::conv_backward(
                            geom,
                            xv,
                            wv,
                            &g,
                            dx.map(|p| (*p).as_mut_slice()),
                            dw.map(|p| (*p).as_mut_slice()),
                            db.map(|p| (*p).as_mut_slice()),
                        );
                    }
                    Op::LayerNorm { x, gamma, beta, cache } => {
                        let c = self.value(*gamma).numel();
                        let gv = self.value(*gamma).data();
                        let dx = slot!(*x);
                        let dg = slot!(*gamma);
                        let dbeta = slot!(*beta);
                        ops::layer_norm_backward(
                            cache,
                            c,
                            gv,
                            &g,
                            dx.map(|p| (*p).as_mut_slice()),
                            dg.map(|p| (*p).as_mut_slice()),
                            dbeta.map(|p| (*p).as_mut_slice()),
                        );
                    }
                    Op::Relu { x } => {
                        if let Some(dx) = slot!(*x) {
                            for ((acc, gi), &y) in (*dx).iter_mut().zip(&g).zip(node.value.data()) {
                                if y > 0.0 {
                                    *acc += gi;
                                }
                            }
                        }
                    }
                    Op::Dropout { x, mask } => {
                        if let Some(dx) = slot!(*x) {
                            for ((acc, gi), m) in (*dx).iter_mut().zip(&g).zip(mask) {
                                *acc += gi * m;
                            }
                        }
                    }
                    Op::Add { a, b } => {
                        for v in [*a, *b] {
                            if let Some(d) = slot!(v) {
                                for (acc, gi) in (*d).iter_mut().zip(&g) {
                                    *acc += gi;
                                }
                            }
                        }
                    }
                    Op::Sub { a, b } => {
                        for (v, sign) in [(*a, 1.0), (*b, -1.0)] {
                            if let Some(d) = slot!(v) {
                                for (acc, gi) in (*d).iter_mut().zip(&g) {
                                    *acc += sign * gi;
                                }
                            }
                        }
                    }
                    Op::Mul { a, b } => {
                        for (v, other) in [(*a, *b), (*b, *a)] {
                            let ov = self.value(other).data();
                            if let Some(d) = slot!(v) {
                                for ((acc, gi), o) in (*d).iter_mut().zip(&g).zip(ov) {
                                    *acc += gi * o;
                                }
                            }
                        }
                    }
                    Op::TakeLast { x, len, keep } => {
                        if let Some(dx) = slot!(*x) {
                            let dx = &mut *dx;
                            let c = self.value(*x).last_dim();
                            let batch = dx.len() / (len * c);
                            for b in 0..batch {
                                let src = &g[b * keep * c..(b + 1) * keep * c];
                                let dst = &mut dx[(b * len + len - keep) * c..(b + 1) * len * c];
                                for (acc, gi) in dst.iter_mut().zip(src) {
                                    *acc += gi;
                                }
                            }
                        }
                    }
                    Op::Dense { x, w, b, rows, c, d } => {
                        let xv = self.value(*x).data();
                        let wv = self.value(*w).data();
                        let dx = slot!(*x);
                        let dw = slot!(*w);
                        let db = slot!(*b);
                        ops::dense_backward(
                            *rows,
                            *c,
                            *d,
                            xv,
                            wv,
                            &g,
                            dx.map(|p| (*p).as_mut_slice()),
                            dw.map(|p| (*p).as_mut_slice()),
                            db.map(|p| (*p).as_mut_slice()),
                        );
                    }
                    Op::Sum { x } => {
                        if let Some(dx) = slot!(*x) {
                            for acc in (*dx).iter_mut() {
                                *acc += g[0];
                            }
                        }
                    }
                    Op::Mean { x } => {
                        if let Some(dx) = slot!(*x) {
                            let scale = g[0] / (*dx).len() as f64;
                            for acc in (*dx).iter_mut() {
                                *acc += scale;
                            }
                        }
                    }
                }
            }
        }

        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        for (node, g) in self.nodes.iter().zip(&grads) {
            if let (Op::Leaf, Some(g)) = (&node.op, g) {
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("backward"));
                }
            }
        }
        Ok(Gradients { grads, shapes })
    }
}

/// Result of [`Tape::backward`]: gradients of the loss w.r.t. leaf nodes.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient for `v`; exact zeros when `v` did not influence the loss.
    pub fn wrt(&self, v: Var) -> Tensor {
        match &self.grads[v.0] {
            Some(g) => Tensor::from_parts(self.shapes[v.0].clone(), g.clone()),
            None => Tensor::zeros(&self.shapes[v.0]),
        }
    }

    /// Add the gradient for `v` into `dst` (no-op for non-participating nodes).
    pub fn accumulate_into(&self, v: Var, dst: &mut [f64]) {
        if let Some(g) = &self.grads[v.0] {
            for (d, s) in dst.iter_mut().zip(g) {
                *d += s;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(3.0));
        let y = tape.mul(x, x).unwrap();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.wrt(x).data(), &[6.0]);
    }

    #[test]
    fn dense_mse_hand_gradient() {
        // loss = mean((x·w + b − y)²) over two rows, D = 1
        // rows x = [1,2], [0,−1]; w = [0.5, −1]; b = 0.25; y = [1, 0]
        // pred = [−1.25, 1.25], r = pred − y = [−2.25, 1.25]
        // ∂/∂w = (2/2) Σ r_i x_i = [−2.25, −4.5 − 1.25] = [−2.25, −5.75]
        // ∂/∂b = Σ r_i = −1.0
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(&[2, 2], vec![1.0, 2.0, 0.0, -1.0]).unwrap());
        let w = tape.param(Tensor::new(&[2, 1], vec![0.5, -1.0]).unwrap());
        let b = tape.param(Tensor::from_vec(vec![0.25]));
        let y = tape.constant(Tensor::from_vec(vec![1.0, 0.0]));
        let pred = tape.dense(x, w, b).unwrap();
        let loss = tape.mse(pred, y).unwrap();
        assert!((tape.value(loss).data()[0] - (2.25f64.powi(2) + 1.25f64.powi(2)) / 2.0).abs() < 1e-15);
        let g = tape.backward(loss).unwrap();
        let gw = g.wrt(w);
        assert!((gw.data()[0] + 2.25).abs() < 1e-14);
        assert!((gw.data()[1] + 5.75).abs() < 1e-14);
        assert!((g.wrt(b).data()[0] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn unused_param_gets_zero() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::from_vec(vec![1.0, 2.0]));
        let unused = tape.param(Tensor::from_vec(vec![5.0; 3]));
        let s = tape.sum(x);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.wrt(unused).data(), &[0.0, 0.0, 0.0]);
        assert_eq!(g.wrt(x).data(), &[1.0, 1.0]);
    }

    #[test]
    fn backward_errors() {
        let tape = Tape::new();
        assert!(matches!(tape.backward(Var(0)), Err(Error::Autodiff(_))));
        let mut tape = Tape::new();
        let x = tape.param(Tensor::from_vec(vec![1.0, 2.0]));
        assert!(matches!(tape.backward(x), Err(Error::Autodiff(_))));
    }

    fn numeric_grad(f: &dyn Fn(&[f64]) -> f64, at: &[f64], h: f64) -> Vec<f64> {
        (0..at.len())
            .map(|i| {
                let mut p = at.to_vec();
                p[i] += h;
                let up = f(&p);
                p[i] -= 2.0 * h;
                let down = f(&p);
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn conv_norm_chain_matches_finite_differences() {
        let mut rng = RngStream::new(99);
        let (b, t, cin, cout, k, d) = (2, 9, 3, 4, 3, 2);
        let x: Vec<f64> = (0..b * t * cin).map(|_| rng.normal()).collect();
        let w0: Vec<f64> = (0..k * cin * cout).map(|_| rng.normal() * 0.5).collect();
        let gamma: Vec<f64> = (0..cout).map(|_| 1.0 + 0.3 * rng.normal()).collect();
        let target: Vec<f64> = (0..b * 4 * cout).map(|_| rng.normal()).collect();
        let run = |w: &[f64]| -> (f64, Vec<f64>) {
            let mut tape = Tape::new();
            let xv = tape.constant(Tensor::new(&[b, t, cin], x.clone()).unwrap());
            let wv = tape.param(Tensor::new(&[k, cin, cout], w.to_vec()).unwrap());
            let bv = tape.param(Tensor::filled(&[cout], 0.1));
            let gv = tape.param(Tensor::from_vec(gamma.clone()));
            let be = tape.param(Tensor::zeros(&[cout]));
            let y = tape.causal_conv1d(xv, wv, bv, d, 4).unwrap();
            let y = tape.layer_norm(y, gv, be, 1e-5).unwrap();
            let tv = tape.constant(Tensor::new(&[b, 4, cout], target.clone()).unwrap());
            let loss = tape.mse(y, tv).unwrap();
            let g = tape.backward(loss).unwrap();
            (tape.value(loss).data()[0], g.wrt(wv).into_data())
        };
        let (_, analytic) = run(&w0);
        let numeric = numeric_grad(&|w| run(w).0, &w0, 1e-5);
        for (a, n) in analytic.iter().zip(&numeric) {
            let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
            assert!(rel < 1e-5, "analytic {} numeric {}", a, n);
        }
    }
}
