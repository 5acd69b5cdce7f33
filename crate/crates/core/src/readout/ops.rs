//! Forward and backward kernels of the readout layers.
//!
//! Convolution weights are laid out `[ky][kx][in][out]` so the innermost
//! loops run over contiguous output channels.

use alloc::vec;
use alloc::vec::Vec;

use super::tensor::{Shape, Tensor};
use crate::error::{contract, Result};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// `x * sigmoid(x)`.
#[inline]
pub fn swish(x: f64) -> f64 {
    x * sigmoid(x)
}

#[inline]
pub fn swish_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s + x * s * (1.0 - s)
}

/// Layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Activation {
    Identity,
    Swish,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Self::Identity => x,
            Self::Swish => swish(x),
        }
    }

    #[inline]
    pub fn grad(self, x: f64) -> f64 {
        match self {
            Self::Identity => 1.0,
            Self::Swish => swish_grad(x),
        }
    }
}

/// Geometry of a same-padded, stride-1 convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub kernel: usize,
    pub in_ch: usize,
    pub out_ch: usize,
}

impl ConvGeometry {
    pub fn weight_len(&self) -> usize {
        self.kernel * self.kernel * self.in_ch * self.out_ch
    }

    fn check(&self, input: Shape, weights: &[f64], bias: &[f64]) -> Result<()> {
        if self.kernel.is_multiple_of(2) {
            return Err(contract!("kernel size {} must be odd", self.kernel));
        }
        if input.channels != self.in_ch {
            return Err(contract!(
                "input has {} channels, convolution expects {}",
                input.channels,
                self.in_ch
            ));
        }
        if weights.len() != self.weight_len() || bias.len() != self.out_ch {
            return Err(contract!("convolution parameters do not match their geometry"));
        }
        Ok(())
    }
}

/// Output-channel block width of the fast kernels.
const BLOCK: usize = 8;

/// Same-padded cross-correlation accumulated into `out`, for channel counts
/// that are multiples of [`BLOCK`]. Weights are `[tap][ci][co]`.
fn correlate_blocked(input: &[f64], rows: usize, cols: usize, ci: usize, k: usize, w: &[f64], co: usize, out: &mut [f64]) {
    let pad = k / 2;
    for r in 0..rows {
        let ky_lo = pad.saturating_sub(r);
        let ky_hi = k.min(rows + pad - r);
        for c in 0..cols {
            let kx_lo = pad.saturating_sub(c);
            let kx_hi = k.min(cols + pad - c);
            let o = (r * cols + c) * co;
            for ob in (0..co).step_by(BLOCK) {
                let mut acc: [f64; BLOCK] = out[o + ob..o + ob + BLOCK].try_into().unwrap();
                for ky in ky_lo..ky_hi {
                    let rr = r + ky - pad;
                    for kx in kx_lo..kx_hi {
                        let cc = c + kx - pad;
                        let px = &input[(rr * cols + cc) * ci..(rr * cols + cc + 1) * ci];
                        let wt = &w[(ky * k + kx) * ci * co + ob..];
                        for (i, &v) in px.iter().enumerate() {
                            let wr: &[f64; BLOCK] = wt[i * co..i * co + BLOCK].try_into().unwrap();
                            for l in 0..BLOCK {
                                acc[l] += v * wr[l];
                            }
                        }
                    }
                }
                out[o + ob..o + ob + BLOCK].copy_from_slice(&acc);
            }
        }
    }
}

/// Cross-correlation with zero same-padding. Returns the pre-activation map.
pub fn conv2d_forward(input: &Tensor, g: ConvGeometry, weights: &[f64], bias: &[f64]) -> Result<Tensor> {
    g.check(input.shape, weights, bias)?;
    let Shape { rows, cols, .. } = input.shape;
    let (k, ci, co) = (g.kernel, g.in_ch, g.out_ch);
    let mut out = Tensor::zeros(Shape::new(rows, cols, co));
    if co % BLOCK == 0 {
        for px in out.data.chunks_exact_mut(co) {
            px.copy_from_slice(bias);
        }
        correlate_blocked(&input.data, rows, cols, ci, k, weights, co, &mut out.data);
        return Ok(out);
    }
    let pad = k / 2;
    for r in 0..rows {
        for c in 0..cols {
            let acc = &mut out.data[(r * cols + c) * co..(r * cols + c + 1) * co];
            acc.copy_from_slice(bias);
            for ky in 0..k {
                let rr = r + ky;
                if rr < pad || rr - pad >= rows {
                    continue;
                }
                let rr = rr - pad;
                for kx in 0..k {
                    let cc = c + kx;
                    if cc < pad || cc - pad >= cols {
                        continue;
                    }
                    let cc = cc - pad;
                    let px = &input.data[(rr * cols + cc) * ci..(rr * cols + cc + 1) * ci];
                    let wbase = (ky * k + kx) * ci * co;
                    for (i, &v) in px.iter().enumerate() {
                        let wrow = &weights[wbase + i * co..wbase + (i + 1) * co];
                        for (a, w) in acc.iter_mut().zip(wrow) {
                            *a += v * w;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of a convolution with respect to its pre-activation output.
pub struct ConvGrads {
    /// `None` when the caller did not ask for it.
    pub input: Option<Tensor>,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Weight gradient `sum_p input[p + tap, i] * grad_out[p, o]`, blocked over
/// output channels.
fn weight_grad_blocked(input: &[f64], grad_out: &[f64], rows: usize, cols: usize, g: ConvGeometry) -> Vec<f64> {
    let (k, ci, co) = (g.kernel, g.in_ch, g.out_ch);
    let pad = k / 2;
    let mut gw = vec![0.0; g.weight_len()];
    for ky in 0..k {
        let (r_lo, r_hi) = (pad.saturating_sub(ky), (rows + pad - ky).min(rows));
        for kx in 0..k {
            let (c_lo, c_hi) = (pad.saturating_sub(kx), (cols + pad - kx).min(cols));
            let tap = (ky * k + kx) * ci * co;
            for i in 0..ci {
                for ob in (0..co).step_by(BLOCK) {
                    let mut acc = [0.0; BLOCK];
                    for r in r_lo..r_hi {
                        let rr = r + ky - pad;
                        for c in c_lo..c_hi {
                            let v = input[(rr * cols + c + kx - pad) * ci + i];
                            let go: &[f64; BLOCK] = grad_out[(r * cols + c) * co + ob..][..BLOCK].try_into().unwrap();
                            for l in 0..BLOCK {
                                acc[l] += v * go[l];
                            }
                        }
                    }
                    gw[tap + i * co + ob..tap + i * co + ob + BLOCK].copy_from_slice(&acc);
                }
            }
        }
    }
    gw
}

/// Exact gradients of [`conv2d_forward`] given `grad_out` (gradient of the
/// loss with respect to the pre-activation output).
pub fn conv2d_backward(
    input: &Tensor,
    g: ConvGeometry,
    weights: &[f64],
    grad_out: &Tensor,
    need_input_grad: bool,
) -> Result<ConvGrads> {
    let Shape { rows, cols, .. } = input.shape;
    let (k, ci, co) = (g.kernel, g.in_ch, g.out_ch);
    if grad_out.shape != Shape::new(rows, cols, co) {
        return Err(contract!("output gradient shape {} does not match the convolution", grad_out.shape));
    }
    if co % BLOCK == 0 && (!need_input_grad || ci % BLOCK == 0) {
        let mut gb = vec![0.0; co];
        for go in grad_out.data.chunks_exact(co) {
            gb.iter_mut().zip(go).for_each(|(b, d)| *b += d);
        }
        let gw = weight_grad_blocked(&input.data, &grad_out.data, rows, cols, g);
        // The input gradient is a correlation of `grad_out` with the kernel
        // flipped in space and transposed in channels.
        let gi = need_input_grad.then(|| {
            let mut flipped = vec![0.0; g.weight_len()];
            for ky in 0..k {
                for kx in 0..k {
                    let src = (ky * k + kx) * ci * co;
                    let dst = ((k - 1 - ky) * k + (k - 1 - kx)) * co * ci;
                    for i in 0..ci {
                        for o in 0..co {
                            flipped[dst + o * ci + i] = weights[src + i * co + o];
                        }
                    }
                }
            }
            let mut gi = Tensor::zeros(input.shape);
            correlate_blocked(&grad_out.data, rows, cols, co, k, &flipped, ci, &mut gi.data);
            gi
        });
        return Ok(ConvGrads {
            input: gi,
            weights: gw,
            bias: gb,
        });
    }
    let pad = k / 2;
    let mut gw = vec![0.0; g.weight_len()];
    let mut gb = vec![0.0; co];
    let mut gi = need_input_grad.then(|| Tensor::zeros(input.shape));
    for r in 0..rows {
        for c in 0..cols {
            let go = &grad_out.data[(r * cols + c) * co..(r * cols + c + 1) * co];
            for (b, d) in gb.iter_mut().zip(go) {
                *b += d;
            }
            for ky in 0..k {
                let rr = r + ky;
                if rr < pad || rr - pad >= rows {
                    continue;
                }
                let rr = rr - pad;
                for kx in 0..k {
                    let cc = c + kx;
                    if cc < pad || cc - pad >= cols {
                        continue;
                    }
                    let cc = cc - pad;
                    let pix = (rr * cols + cc) * ci;
                    let wbase = (ky * k + kx) * ci * co;
                    for i in 0..ci {
                        let v = input.data[pix + i];
                        let wslot = wbase + i * co..wbase + (i + 1) * co;
                        for (w, d) in gw[wslot.clone()].iter_mut().zip(go) {
                            *w += v * d;
                        }
                        if let Some(gi) = gi.as_mut() {
                            let dot: f64 = weights[wslot].iter().zip(go).map(|(w, d)| w * d).sum();
                            gi.data[pix + i] += dot;
                        }
                    }
                }
            }
        }
    }
    Ok(ConvGrads {
        input: gi,
        weights: gw,
        bias: gb,
    })
}

/// Output shape of a 2x2, stride-2 max pool. Odd trailing rows and columns
/// are dropped.
pub fn pooled_shape(s: Shape) -> Shape {
    Shape::new(s.rows / 2, s.cols / 2, s.channels)
}

/// 2x2 max pool. The mask holds, for each output element, the flat input
/// index it was taken from; ties go to the first position in row-major order.
pub fn maxpool2x2_forward(input: &Tensor) -> (Tensor, Vec<usize>) {
    let s = input.shape;
    let os = pooled_shape(s);
    let ch = s.channels;
    let mut out = Tensor::zeros(os);
    let mut mask = vec![0usize; os.len()];
    for r in 0..os.rows {
        for c in 0..os.cols {
            for k in 0..ch {
                let mut best_idx = ((2 * r) * s.cols + 2 * c) * ch + k;
                let mut best = input.data[best_idx];
                for (dr, dc) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = ((2 * r + dr) * s.cols + 2 * c + dc) * ch + k;
                    if input.data[idx] > best {
                        best = input.data[idx];
                        best_idx = idx;
                    }
                }
                let o = (r * os.cols + c) * ch + k;
                out.data[o] = best;
                mask[o] = best_idx;
            }
        }
    }
    (out, mask)
}

/// Route each output gradient to the input position recorded in `mask`.
pub fn maxpool2x2_backward(grad_out: &Tensor, mask: &[usize], input_shape: Shape) -> Tensor {
    let mut gi = Tensor::zeros(input_shape);
    for (g, &idx) in grad_out.data.iter().zip(mask) {
        gi.data[idx] += g;
    }
    gi
}

/// `W x + b` with `W` stored `[out][in]`.
pub fn dense_forward(x: &[f64], weights: &[f64], bias: &[f64]) -> Result<Vec<f64>> {
    let n_in = x.len();
    if n_in == 0 || weights.len() != n_in * bias.len() {
        return Err(contract!(
            "dense layer with {} weights and {} outputs cannot take {} inputs",
            weights.len(),
            bias.len(),
            n_in
        ));
    }
    Ok(weights
        .chunks_exact(n_in)
        .zip(bias)
        .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
        .collect())
}

pub struct DenseGrads {
    pub input: Option<Vec<f64>>,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Exact gradients of [`dense_forward`] given the pre-activation gradient.
pub fn dense_backward(x: &[f64], weights: &[f64], grad_out: &[f64], need_input_grad: bool) -> Result<DenseGrads> {
    let n_in = x.len();
    if weights.len() != n_in * grad_out.len() {
        return Err(contract!("dense gradient shapes do not compose"));
    }
    let mut gw = vec![0.0; weights.len()];
    for (row, d) in gw.chunks_exact_mut(n_in).zip(grad_out) {
        for (w, v) in row.iter_mut().zip(x) {
            *w = d * v;
        }
    }
    let gi = need_input_grad.then(|| {
        let mut gi = vec![0.0; n_in];
        for (row, d) in weights.chunks_exact(n_in).zip(grad_out) {
            for (g, w) in gi.iter_mut().zip(row) {
                *g += w * d;
            }
        }
        gi
    });
    Ok(DenseGrads {
        input: gi,
        weights: gw,
        bias: grad_out.to_vec(),
    })
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|v| libm::exp(v - m)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Cross-entropy of `softmax(logits)` against `label`, and its gradient
/// `p - onehot(label)`.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(contract!("label {label} out of range for {} classes", logits.len()));
    }
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = libm::log(logits.iter().map(|v| libm::exp(v - m)).sum::<f64>());
    let loss = log_sum - (logits[label] - m);
    let mut grad = softmax(logits);
    grad[label] -= 1.0;
    Ok((loss, grad))
}
