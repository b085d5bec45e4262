//! Layer primitives with exact backward passes.
//!
//! Convolutions use "same" zero padding and stride 1 with cross-correlation
//! semantics:
//! `out[h, w, o] = bias[o] + Σ in[h + i − kh/2, w + j − kw/2, c] · k[i, j, c, o]`.
//! They are evaluated as an im2col expansion followed by a GEMM.

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

/// `c = alpha · a·b + beta · c` for row-major `c` of shape `m × n`, with
/// arbitrary strides on `a` (`m × k`) and `b` (`k × n`).
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (isize, isize),
    b: &[f64],
    b_strides: (isize, isize),
    beta: f64,
    c: &mut [f64],
) {
    assert!(c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    let max_index = |rows: usize, cols: usize, (rs, cs): (isize, isize)| {
        (rows.saturating_sub(1)) as isize * rs + (cols.saturating_sub(1)) as isize * cs
    };
    if k > 0 {
        assert!((max_index(m, k, a_strides) as usize) < a.len());
        assert!((max_index(k, n, b_strides) as usize) < b.len());
    }
    // SAFETY: the asserts above bound every element touched by the strided
    // views, and `c` is a distinct mutable borrow of at least m·n values.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0,
            a_strides.1,
            b.as_ptr(),
            b_strides.0,
            b_strides.1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Geometry of one convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvShape {
    pub height: usize,
    pub width: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
}

impl ConvShape {
    pub fn patch_len(&self) -> usize {
        self.kernel_h * self.kernel_w * self.in_channels
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    fn from_tensors(input: &Tensor, kernels: &Tensor, bias: &Tensor) -> Result<Self> {
        input.expect_rank(3, "convolution input")?;
        kernels.expect_rank(4, "convolution kernels")?;
        bias.expect_rank(1, "convolution bias")?;
        let (h, w, c_in) = (input.shape()[0], input.shape()[1], input.shape()[2]);
        let (kh, kw, kc, c_out) = (
            kernels.shape()[0],
            kernels.shape()[1],
            kernels.shape()[2],
            kernels.shape()[3],
        );
        if kc != c_in {
            return Err(Error::Shape(format!(
                "kernel expects {kc} input channels, input has {c_in}"
            )));
        }
        if bias.shape()[0] != c_out {
            return Err(Error::Shape(format!(
                "bias has {} entries for {c_out} filters",
                bias.shape()[0]
            )));
        }
        if kh == 0 || kw == 0 || kh > h || kw > w {
            return Err(Error::Shape(format!("kernel {kh}x{kw} does not fit a {h}x{w} input")));
        }
        Ok(Self {
            height: h,
            width: w,
            in_channels: c_in,
            out_channels: c_out,
            kernel_h: kh,
            kernel_w: kw,
        })
    }
}

/// Expands `input` (`H × W × C`) into `cols` (`H·W × kh·kw·C`).
pub(crate) fn im2col(shape: &ConvShape, input: &[f64], cols: &mut Vec<f64>) {
    let (h, w, c) = (shape.height, shape.width, shape.in_channels);
    let (kh, kw) = (shape.kernel_h, shape.kernel_w);
    let (ph, pw) = ((kh / 2) as isize, (kw / 2) as isize);
    cols.clear();
    cols.resize(shape.pixels() * shape.patch_len(), 0.0);
    let mut dst = 0;
    for y in 0..h as isize {
        for x in 0..w as isize {
            for i in 0..kh as isize {
                let sy = y + i - ph;
                for j in 0..kw as isize {
                    let sx = x + j - pw;
                    if sy >= 0 && sy < h as isize && sx >= 0 && sx < w as isize {
                        let src = (sy as usize * w + sx as usize) * c;
                        cols[dst..dst + c].copy_from_slice(&input[src..src + c]);
                    }
                    dst += c;
                }
            }
        }
    }
}

/// Scatters patch gradients back onto the input grid (adjoint of [`im2col`]).
pub(crate) fn col2im(shape: &ConvShape, cols: &[f64], grad_input: &mut [f64]) {
    let (h, w, c) = (shape.height, shape.width, shape.in_channels);
    let (kh, kw) = (shape.kernel_h, shape.kernel_w);
    let (ph, pw) = ((kh / 2) as isize, (kw / 2) as isize);
    grad_input.iter_mut().for_each(|v| *v = 0.0);
    let mut src = 0;
    for y in 0..h as isize {
        for x in 0..w as isize {
            for i in 0..kh as isize {
                let sy = y + i - ph;
                for j in 0..kw as isize {
                    let sx = x + j - pw;
                    if sy >= 0 && sy < h as isize && sx >= 0 && sx < w as isize {
                        let dst = (sy as usize * w + sx as usize) * c;
                        for (g, v) in grad_input[dst..dst + c].iter_mut().zip(&cols[src..src + c]) {
                            *g += v;
                        }
                    }
                    src += c;
                }
            }
        }
    }
}

/// `out = cols · kernels + bias`, written into `out` (`H·W × C_out`).
pub(crate) fn conv_forward_cols(shape: &ConvShape, cols: &[f64], kernels: &[f64], bias: &[f64], out: &mut Vec<f64>) {
    let (p, k, o) = (shape.pixels(), shape.patch_len(), shape.out_channels);
    out.clear();
    out.reserve(p * o);
    for _ in 0..p {
        out.extend_from_slice(bias);
    }
    gemm(p, k, o, cols, (k as isize, 1), kernels, (o as isize, 1), 1.0, out);
}

/// Accumulates kernel and bias gradients; optionally writes the patch gradient.
pub(crate) fn conv_backward_cols(
    shape: &ConvShape,
    cols: &[f64],
    kernels: &[f64],
    grad_out: &[f64],
    grad_kernels: &mut [f64],
    grad_bias: &mut [f64],
    grad_cols: Option<&mut Vec<f64>>,
) {
    let (p, k, o) = (shape.pixels(), shape.patch_len(), shape.out_channels);
    gemm(
        k,
        p,
        o,
        cols,
        (1, k as isize),
        grad_out,
        (o as isize, 1),
        1.0,
        grad_kernels,
    );
    for row in grad_out.chunks_exact(o) {
        for (b, g) in grad_bias.iter_mut().zip(row) {
            *b += g;
        }
    }
    if let Some(gc) = grad_cols {
        gc.clear();
        gc.resize(p * k, 0.0);
        gemm(p, o, k, grad_out, (o as isize, 1), kernels, (1, o as isize), 0.0, gc);
    }
}

/// Same-padded, stride-1 2-D convolution of an `H × W × C_in` input with
/// `kh × kw × C_in × C_out` kernels.
pub fn conv2d_forward(input: &Tensor, kernels: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let shape = ConvShape::from_tensors(input, kernels, bias)?;
    let mut cols = Vec::new();
    im2col(&shape, input.data(), &mut cols);
    let mut out = Vec::new();
    conv_forward_cols(&shape, &cols, kernels.data(), bias.data(), &mut out);
    Tensor::new(vec![shape.height, shape.width, shape.out_channels], out)
}

/// Gradients of a convolution with respect to its input, kernels and bias.
pub struct ConvGrads {
    pub input: Tensor,
    pub kernels: Tensor,
    pub bias: Tensor,
}

pub fn conv2d_backward(grad_out: &Tensor, input: &Tensor, kernels: &Tensor) -> Result<ConvGrads> {
    kernels.expect_rank(4, "convolution kernels")?;
    let c_out = kernels.shape()[3];
    let bias = Tensor::zeros(&[c_out]);
    let shape = ConvShape::from_tensors(input, kernels, &bias)?;
    if grad_out.shape() != [shape.height, shape.width, c_out] {
        return Err(Error::Shape(format!(
            "output gradient shape {:?} does not match {}x{}x{}",
            grad_out.shape(),
            shape.height,
            shape.width,
            c_out
        )));
    }
    let mut cols = Vec::new();
    im2col(&shape, input.data(), &mut cols);
    let mut gk = Tensor::zeros(kernels.shape());
    let mut gb = Tensor::zeros(&[c_out]);
    let mut gcols = Vec::new();
    conv_backward_cols(
        &shape,
        &cols,
        kernels.data(),
        grad_out.data(),
        gk.data_mut(),
        gb.data_mut(),
        Some(&mut gcols),
    );
    let mut gi = Tensor::zeros(input.shape());
    col2im(&shape, &gcols, gi.data_mut());
    Ok(ConvGrads {
        input: gi,
        kernels: gk,
        bias: gb,
    })
}

pub fn relu(x: &Tensor) -> Tensor {
    Tensor::new(x.shape().to_vec(), x.data().iter().map(|&v| v.max(0.0)).collect()).expect("shape preserved")
}

/// Passes `grad` where `x > 0`; zero elsewhere, including at `x = 0`.
pub fn relu_backward(grad: &Tensor, x: &Tensor) -> Result<Tensor> {
    if grad.shape() != x.shape() {
        return Err(Error::Shape("relu gradient and cached input differ in shape".into()));
    }
    Tensor::new(
        x.shape().to_vec(),
        grad.data()
            .iter()
            .zip(x.data())
            .map(|(&g, &v)| if v > 0.0 { g } else { 0.0 })
            .collect(),
    )
}

/// `logits = Wᵀx + b` with `W` of shape `[n_in, n_out]`.
pub fn fully_connected(x: &[f64], weights: &Tensor, bias: &Tensor) -> Result<Vec<f64>> {
    weights.expect_rank(2, "dense weights")?;
    let (n_in, n_out) = (weights.shape()[0], weights.shape()[1]);
    if x.len() != n_in || bias.len() != n_out {
        return Err(Error::Shape(format!(
            "dense layer {n_in}->{n_out} got input {} and bias {}",
            x.len(),
            bias.len()
        )));
    }
    let mut out = bias.data().to_vec();
    for (xi, row) in x.iter().zip(weights.data().chunks_exact(n_out)) {
        for (o, w) in out.iter_mut().zip(row) {
            *o += xi * w;
        }
    }
    Ok(out)
}

pub struct DenseGrads {
    pub input: Vec<f64>,
    pub weights: Tensor,
    pub bias: Tensor,
}

pub fn fully_connected_backward(grad_out: &[f64], x: &[f64], weights: &Tensor) -> Result<DenseGrads> {
    weights.expect_rank(2, "dense weights")?;
    let (n_in, n_out) = (weights.shape()[0], weights.shape()[1]);
    if x.len() != n_in || grad_out.len() != n_out {
        return Err(Error::Shape("dense backward shapes disagree".into()));
    }
    let mut gw = Tensor::zeros(&[n_in, n_out]);
    let mut gx = vec![0.0; n_in];
    for ((xi, gxi), (wrow, gwrow)) in x.iter().zip(gx.iter_mut()).zip(
        weights
            .data()
            .chunks_exact(n_out)
            .zip(gw.data_mut().chunks_exact_mut(n_out)),
    ) {
        for ((g, w), gwv) in grad_out.iter().zip(wrow).zip(gwrow.iter_mut()) {
            *gwv = xi * g;
            *gxi += w * g;
        }
    }
    Ok(DenseGrads {
        input: gx,
        weights: gw,
        bias: Tensor::new(vec![n_out], grad_out.to_vec())?,
    })
}

/// Max-shifted softmax probabilities.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of the softmax of `logits` against `label`, and its
/// gradient `p − onehot(label)`.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::InvalidArgument(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("logits".into()));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
    let loss = -(logits[label] - max - log_sum);
    let mut grad = softmax(logits);
    grad[label] -= 1.0;
    Ok((loss, grad))
}

/// `p ← p − lr · g`. Rejects non-finite gradients and negative rates.
pub fn sgd_step(params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::Shape("parameter and gradient lengths differ".into()));
    }
    if !(lr.is_finite() && lr >= 0.0) {
        return Err(Error::InvalidArgument(format!("learning rate must be >= 0, got {lr}")));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient".into()));
    }
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= lr * g;
    }
    Ok(())
}
