//! Forward operators and the raw kernels their gradients are built from.
//!
//! Sequence tensors are `[T × C]` or batched `[B × T × C]`, time-major within
//! each batch element. Convolution kernels are `[k × C_in × C_out]`.

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::tensor::Tensor;

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// `C += A · B` for strided row/column views.
#[allow(clippy::too_many_arguments)]
fn gemm_acc(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    c: &mut [f64],
    rsc: usize,
    csc: usize,
) {
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    assert!((m - 1) * rsa + (k - 1) * csa < a.len());
    assert!((k - 1) * rsb + (n - 1) * csb < b.len());
    assert!((m - 1) * rsc + (n - 1) * csc < c.len());
    // SAFETY: the three asserts above bound every element the kernel touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            1.0,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// `(batch, len, channels)` view of a rank-2 or rank-3 sequence tensor.
pub(crate) fn seq_dims(t: &Tensor, op: &'static str) -> Result<(usize, usize, usize)> {
    match *t.shape() {
        [len, c] => Ok((1, len, c)),
        [b, len, c] => Ok((b, len, c)),
        ref s => Err(Error::shape(op, format!("expected [T×C] or [B×T×C], got {:?}", s))),
    }
}

pub(crate) fn seq_shape(like: &Tensor, len: usize, channels: usize) -> Vec<usize> {
    if like.rank() == 3 {
        vec![like.shape()[0], len, channels]
    } else {
        vec![len, channels]
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub batch: usize,
    pub len: usize,
    pub cin: usize,
    pub k: usize,
    pub cout: usize,
    pub dilation: usize,
    pub keep: usize,
}

impl ConvGeom {
    pub fn check(input: &Tensor, kernel: &Tensor, bias: &Tensor, dilation: usize, keep: usize) -> Result<Self> {
        const OP: &str = "causal_conv1d";
        let (batch, len, cin) = seq_dims(input, OP)?;
        let [k, kcin, cout] = *kernel.shape() else {
            return Err(Error::shape(OP, format!("kernel must be [k×C_in×C_out], got {:?}", kernel.shape())));
        };
        if kcin != cin {
            return Err(Error::shape(OP, format!("input has {} channels, kernel expects {}", cin, kcin)));
        }
        if bias.shape() != [cout] {
            return Err(Error::shape(OP, format!("bias {:?} vs C_out {}", bias.shape(), cout)));
        }
        if len == 0 || k == 0 {
            return Err(Error::shape(OP, "empty input or kernel"));
        }
        if dilation == 0 {
            return Err(Error::InvalidArgument("dilation must be >= 1".into()));
        }
        if keep == 0 || keep > len {
            return Err(Error::shape(OP, format!("keep {} outside 1..={}", keep, len)));
        }
        Ok(Self { batch, len, cin, k, cout, dilation, keep })
    }

    /// Input row read by output row `i` through tap `j`, if it is not padding.
    /// Output row `i` sits at sequence position `len - keep + i`.
    fn first_valid(&self, j: usize) -> usize {
        let lag = (self.k - 1 - j) * self.dilation;
        lag.saturating_sub(self.len - self.keep)
    }

    fn src(&self, i: usize, j: usize) -> usize {
        self.len - self.keep + i - (self.k - 1 - j) * self.dilation
    }
}

pub(crate) fn conv_forward(g: &ConvGeom, x: &[f64], w: &[f64], bias: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(g.batch * g.keep * g.cout);
    for _ in 0..g.batch * g.keep {
        out.extend_from_slice(bias);
    }
    for b in 0..g.batch {
        let xb = &x[b * g.len * g.cin..(b + 1) * g.len * g.cin];
        let ob = &mut out[b * g.keep * g.cout..(b + 1) * g.keep * g.cout];
        for j in 0..g.k {
            let i0 = g.first_valid(j);
            if i0 >= g.keep {
                continue;
            }
            let m = g.keep - i0;
            let s0 = g.src(i0, j);
            gemm_acc(
                m,
                g.cin,
                g.cout,
                &xb[s0 * g.cin..],
                g.cin,
                1,
                &w[j * g.cin * g.cout..(j + 1) * g.cin * g.cout],
                g.cout,
                1,
                &mut ob[i0 * g.cout..],
                g.cout,
                1,
            );
        }
    }
    out
}

/// Gradients of the convolution w.r.t. input, kernel and bias (accumulated).
pub(crate) fn conv_backward(
    g: &ConvGeom,
    x: &[f64],
    w: &[f64],
    dout: &[f64],
    dx: Option<&mut [f64]>,
    dw: Option<&mut [f64]>,
    db: Option<&mut [f64]>,
) {
    if let Some(db) = db {
        for row in dout.chunks_exact(g.cout) {
            for (acc, v) in db.iter_mut().zip(row) {
                *acc += v;
            }
        }
    }
    let mut dx = dx;
    let mut dw = dw;
    for b in 0..g.batch {
        let xb = &x[b * g.len * g.cin..(b + 1) * g.len * g.cin];
        let gb = &dout[b * g.keep * g.cout..(b + 1) * g.keep * g.cout];
        for j in 0..g.k {
            let i0 = g.first_valid(j);
            if i0 >= g.keep {
                continue;
            }
            let m = g.keep - i0;
            let s0 = g.src(i0, j);
            let wj = &w[j * g.cin * g.cout..(j + 1) * g.cin * g.cout];
            if let Some(dx) = dx.as_deref_mut() {
                let dxb = &mut dx[b * g.len * g.cin..(b + 1) * g.len * g.cin];
                // dX[s0.., :] += dOut[i0.., :] · W_jᵀ
                gemm_acc(
                    m,
                    g.cout,
                    g.cin,
                    &gb[i0 * g.cout..],
                    g.cout,
                    1,
                    wj,
                    1,
                    g.cout,
                    &mut dxb[s0 * g.cin..],
                    g.cin,
                    1,
                );
            }
            if let Some(dw) = dw.as_deref_mut() {
                let dwj = &mut dw[j * g.cin * g.cout..(j + 1) * g.cin * g.cout];
                // dW_j += X[s0.., :]ᵀ · dOut[i0.., :]
                gemm_acc(g.cin, m, g.cout, &xb[s0 * g.cin..], 1, g.cin, &gb[i0 * g.cout..], g.cout, 1, dwj, g.cout, 1);
            }
        }
    }
}

/// Dilated causal 1-D convolution with left zero padding of `(k−1)·dilation`;
/// output length equals input length.
pub fn causal_conv1d(input: &Tensor, kernel: &Tensor, bias: &Tensor, dilation: usize) -> Result<Tensor> {
    let len = seq_dims(input, "causal_conv1d")?.1;
    causal_conv1d_tail(input, kernel, bias, dilation, len)
}

/// Same as [`causal_conv1d`] but only the last `keep` output steps are produced.
///
/// Rows before the start of `input` read as zero padding, so when `input` is
/// itself a suffix of a longer sequence the caller must ensure `keep` is small
/// enough that no such read occurs.
pub fn causal_conv1d_tail(
    input: &Tensor,
    kernel: &Tensor,
    bias: &Tensor,
    dilation: usize,
    keep: usize,
) -> Result<Tensor> {
    let g = ConvGeom::check(input, kernel, bias, dilation, keep)?;
    input.ensure_finite("causal_conv1d input")?;
    kernel.ensure_finite("causal_conv1d kernel")?;
    bias.ensure_finite("causal_conv1d bias")?;
    let out = conv_forward(&g, input.data(), kernel.data(), bias.data());
    Ok(Tensor::from_parts(seq_shape(input, keep, g.cout), out))
}

/// Normalized values and per-row reciprocal standard deviations, kept for the backward pass.
pub(crate) struct LayerNormCache {
    pub xhat: Vec<f64>,
    pub rstd: Vec<f64>,
}

pub(crate) fn layer_norm_forward(
    x: &[f64],
    c: usize,
    gamma: &[f64],
    beta: &[f64],
    eps: f64,
) -> (Vec<f64>, LayerNormCache) {
    let rows = x.len() / c;
    let mut out = vec![0.0; x.len()];
    let mut xhat = vec![0.0; x.len()];
    let mut rstd = vec![0.0; rows];
    for r in 0..rows {
        let row = &x[r * c..(r + 1) * c];
        let mean = row.iter().sum::<f64>() / c as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
        let rs = 1.0 / (var + eps).sqrt();
        rstd[r] = rs;
        for i in 0..c {
            let h = (row[i] - mean) * rs;
            xhat[r * c + i] = h;
            out[r * c + i] = gamma[i] * h + beta[i];
        }
    }
    (out, LayerNormCache { xhat, rstd })
}

pub(crate) fn layer_norm_backward(
    cache: &LayerNormCache,
    c: usize,
    gamma: &[f64],
    dout: &[f64],
    dx: Option<&mut [f64]>,
    dgamma: Option<&mut [f64]>,
    dbeta: Option<&mut [f64]>,
) {
    if let Some(dg) = dgamma {
        for (go, h) in dout.chunks_exact(c).zip(cache.xhat.chunks_exact(c)) {
            for i in 0..c {
                dg[i] += go[i] * h[i];
            }
        }
    }
    if let Some(dbeta) = dbeta {
        for go in dout.chunks_exact(c) {
            for i in 0..c {
                dbeta[i] += go[i];
            }
        }
    }
    if let Some(dx) = dx {
        let n = c as f64;
        for (r, rs) in cache.rstd.iter().enumerate() {
            let go = &dout[r * c..(r + 1) * c];
            let h = &cache.xhat[r * c..(r + 1) * c];
            let mut sum_d = 0.0;
            let mut sum_dh = 0.0;
            for i in 0..c {
                let d = go[i] * gamma[i];
                sum_d += d;
                sum_dh += d * h[i];
            }
            let dxr = &mut dx[r * c..(r + 1) * c];
            for i in 0..c {
                let d = go[i] * gamma[i];
                dxr[i] += rs / n * (n * d - sum_d - h[i] * sum_dh);
            }
        }
    }
}

pub(crate) fn check_layer_norm(input: &Tensor, gamma: &Tensor, beta: &Tensor, eps: f64) -> Result<usize> {
    let c = input.last_dim();
    if c == 0 || gamma.shape() != [c] || beta.shape() != [c] {
        return Err(Error::shape(
            "layer_norm",
            format!("input {:?}, gamma {:?}, beta {:?}", input.shape(), gamma.shape(), beta.shape()),
        ));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("layer_norm epsilon must be > 0, got {}", eps)));
    }
    Ok(c)
}

/// Normalize each time step across channels, then scale and shift.
pub fn layer_norm(input: &Tensor, gamma: &Tensor, beta: &Tensor, eps: f64) -> Result<Tensor> {
    let c = check_layer_norm(input, gamma, beta, eps)?;
    input.ensure_finite("layer_norm input")?;
    let (out, _) = layer_norm_forward(input.data(), c, gamma.data(), beta.data(), eps);
    Ok(Tensor::from_parts(input.shape().to_vec(), out))
}

pub(crate) fn check_dense(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<(usize, usize, usize)> {
    let (rows, c) = match *input.shape() {
        [c] => (1, c),
        [b, c] => (b, c),
        ref s => return Err(Error::shape("dense", format!("input must be [C] or [B×C], got {:?}", s))),
    };
    let [wc, d] = *weight.shape() else {
        return Err(Error::shape("dense", format!("weight must be [C×D], got {:?}", weight.shape())));
    };
    if wc != c || bias.shape() != [d] {
        return Err(Error::shape(
            "dense",
            format!("input {:?}, weight {:?}, bias {:?}", input.shape(), weight.shape(), bias.shape()),
        ));
    }
    Ok((rows, c, d))
}

pub(crate) fn dense_forward(rows: usize, c: usize, d: usize, x: &[f64], w: &[f64], bias: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * d);
    for _ in 0..rows {
        out.extend_from_slice(bias);
    }
    gemm_acc(rows, c, d, x, c, 1, w, d, 1, &mut out, d, 1);
    out
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn dense_backward(
    rows: usize,
    c: usize,
    d: usize,
    x: &[f64],
    w: &[f64],
    dout: &[f64],
    dx: Option<&mut [f64]>,
    dw: Option<&mut [f64]>,
    db: Option<&mut [f64]>,
) {
    if let Some(dx) = dx {
        gemm_acc(rows, d, c, dout, d, 1, w, 1, d, dx, c, 1);
    }
    if let Some(dw) = dw {
        gemm_acc(c, rows, d, x, 1, c, dout, d, 1, dw, d, 1);
    }
    if let Some(db) = db {
        for row in dout.chunks_exact(d) {
            for (acc, v) in db.iter_mut().zip(row) {
                *acc += v;
            }
        }
    }
}

/// Affine map `input · weight + bias` with no activation.
pub fn dense(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (rows, c, d) = check_dense(input, weight, bias)?;
    let out = dense_forward(rows, c, d, input.data(), weight.data(), bias.data());
    let shape = if input.rank() == 1 { vec![d] } else { vec![rows, d] };
    Ok(Tensor::from_parts(shape, out))
}

pub fn relu(input: &Tensor) -> Tensor {
    let data = input.data().iter().map(|&v| v.max(0.0)).collect();
    Tensor::from_parts(input.shape().to_vec(), data)
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`, else `1/(1−rate)`.
pub(crate) fn dropout_mask(n: usize, rate: f64, rng: &mut RngStream) -> Vec<f64> {
    let scale = 1.0 / (1.0 - rate);
    (0..n).map(|_| if rng.uniform() < rate { 0.0 } else { scale }).collect()
}

pub(crate) fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!("dropout rate must be in [0, 1), got {}", rate)));
    }
    Ok(())
}

/// Inverted dropout. Identity at inference or when `rate == 0`.
pub fn dropout(input: &Tensor, rate: f64, rng: &mut RngStream, training: bool) -> Result<Tensor> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok(input.clone());
    }
    let mask = dropout_mask(input.numel(), rate, rng);
    let data = input.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
    Ok(Tensor::from_parts(input.shape().to_vec(), data))
}
