//! Convolution primitives and their adjoints.
//!
//! Three kernels cover every conv-family forward and backward pass:
//!
//! * [`correlate`]: strided, zero-padded cross-correlation `x -> y`.
//! * [`scatter`]: its exact adjoint `y -> x` (the transpose convolution).
//! * [`kernel_grad`]: the derivative of `<correlate(x, w), g>` with respect to `w`.

use super::FeatureMap;
use crate::{Error, Result};

/// Kernel of shape `out_ch x in_ch x k x k` for a correlation from `in_ch`
/// to `out_ch` channels.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    pub out_ch: usize,
    pub in_ch: usize,
    pub k: usize,
    pub data: Vec<f64>,
}

impl Kernel {
    pub fn new(out_ch: usize, in_ch: usize, k: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != out_ch * in_ch * k * k {
            return Err(Error::Dimension(format!(
                "kernel {out_ch}x{in_ch}x{k}x{k} needs {} values, got {}",
                out_ch * in_ch * k * k,
                data.len()
            )));
        }
        Ok(Self { out_ch, in_ch, k, data })
    }

    pub fn zeros(out_ch: usize, in_ch: usize, k: usize) -> Self {
        Self {
            out_ch,
            in_ch,
            k,
            data: vec![0.0; out_ch * in_ch * k * k],
        }
    }

    #[inline]
    fn idx(&self, o: usize, i: usize, ki: usize, kj: usize) -> usize {
        ((o * self.in_ch + i) * self.k + ki) * self.k + kj
    }
}

/// Output side of a correlation: `floor((n + 2p - k) / s) + 1`.
pub fn conv_out_size(n: usize, k: usize, stride: usize, padding: usize) -> Result<usize> {
    if stride == 0 {
        return Err(Error::Dimension("stride must be positive".into()));
    }
    let padded = n + 2 * padding;
    if padded < k {
        return Err(Error::Dimension(format!(
            "input {n} with padding {padding} smaller than kernel {k}"
        )));
    }
    Ok((padded - k) / stride + 1)
}

/// Side produced by a transpose convolution: `(n - 1) s - 2p + k`.
pub fn transpose_out_size(n: usize, k: usize, stride: usize, padding: usize) -> Result<usize> {
    let full = (n.saturating_sub(1)) * stride + k;
    full.checked_sub(2 * padding)
        .filter(|&v| v > 0)
        .ok_or_else(|| Error::Dimension(format!("transpose conv of size {n} collapses to nothing")))
}

/// Input row (or column) touched by output `o` and kernel tap `t`.
#[inline]
fn source(o: usize, t: usize, stride: usize, padding: usize, n: usize) -> Option<usize> {
    let pos = (o * stride + t) as isize - padding as isize;
    (pos >= 0 && (pos as usize) < n).then_some(pos as usize)
}

/// `y[o, p] = sum_{i, t} w[o, i, t] x[i, p * s - pad + t]`.
pub fn correlate(x: &FeatureMap, w: &Kernel, stride: usize, padding: usize) -> Result<FeatureMap> {
    if x.channels != w.in_ch {
        return Err(Error::Dimension(format!(
            "input has {} channels, kernel expects {}",
            x.channels, w.in_ch
        )));
    }
    let ho = conv_out_size(x.height, w.k, stride, padding)?;
    let wo = conv_out_size(x.width, w.k, stride, padding)?;
    let mut y = FeatureMap::zeros(w.out_ch, ho, wo);
    for o in 0..w.out_ch {
        let out = &mut y.data[o * ho * wo..(o + 1) * ho * wo];
        for i in 0..w.in_ch {
            let xin = x.channel_slice(i);
            for ki in 0..w.k {
                for kj in 0..w.k {
                    let wv = w.data[w.idx(o, i, ki, kj)];
                    if wv == 0.0 {
                        continue;
                    }
                    for oi in 0..ho {
                        let Some(si) = source(oi, ki, stride, padding, x.height) else {
                            continue;
                        };
                        let row = &xin[si * x.width..(si + 1) * x.width];
                        let orow = &mut out[oi * wo..(oi + 1) * wo];
                        for (oj, ov) in orow.iter_mut().enumerate() {
                            if let Some(sj) = source(oj, kj, stride, padding, x.width) {
                                *ov += wv * row[sj];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(y)
}

/// Adjoint of [`correlate`]: maps `out_ch` channels of size `ho x wo` back to
/// `in_ch` channels of size `height x width`.
pub fn scatter(
    y: &FeatureMap,
    w: &Kernel,
    stride: usize,
    padding: usize,
    height: usize,
    width: usize,
) -> Result<FeatureMap> {
    if y.channels != w.out_ch {
        return Err(Error::Dimension(format!(
            "input has {} channels, transposed kernel expects {}",
            y.channels, w.out_ch
        )));
    }
    let mut x = FeatureMap::zeros(w.in_ch, height, width);
    let (ho, wo) = (y.height, y.width);
    for o in 0..w.out_ch {
        let yin = y.channel_slice(o);
        for i in 0..w.in_ch {
            let xout = &mut x.data[i * height * width..(i + 1) * height * width];
            for ki in 0..w.k {
                for kj in 0..w.k {
                    let wv = w.data[w.idx(o, i, ki, kj)];
                    if wv == 0.0 {
                        continue;
                    }
                    for oi in 0..ho {
                        let Some(si) = source(oi, ki, stride, padding, height) else {
                            continue;
                        };
                        let yrow = &yin[oi * wo..(oi + 1) * wo];
                        let xrow = &mut xout[si * width..(si + 1) * width];
                        for (oj, &yv) in yrow.iter().enumerate() {
                            if let Some(sj) = source(oj, kj, stride, padding, width) {
                                xrow[sj] += wv * yv;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(x)
}

/// `dw[o, i, t] = sum_p g[o, p] x[i, p * s - pad + t]`.
pub fn kernel_grad(x: &FeatureMap, g: &FeatureMap, k: usize, stride: usize, padding: usize) -> Kernel {
    let mut dw = Kernel::zeros(g.channels, x.channels, k);
    let (ho, wo) = (g.height, g.width);
    for o in 0..g.channels {
        let gin = g.channel_slice(o);
        for i in 0..x.channels {
            let xin = x.channel_slice(i);
            for ki in 0..k {
                for kj in 0..k {
                    let mut acc = 0.0;
                    for oi in 0..ho {
                        let Some(si) = source(oi, ki, stride, padding, x.height) else {
                            continue;
                        };
                        let row = &xin[si * x.width..(si + 1) * x.width];
                        let grow = &gin[oi * wo..(oi + 1) * wo];
                        for (oj, &gv) in grow.iter().enumerate() {
                            if let Some(sj) = source(oj, kj, stride, padding, x.width) {
                                acc += gv * row[sj];
                            }
                        }
                    }
                    let idx = dw.idx(o, i, ki, kj);
                    dw.data[idx] = acc;
                }
            }
        }
    }
    dw
}

/// Convolution layer forward: correlation plus per-channel bias.
pub fn conv2d(x: &FeatureMap, w: &Kernel, bias: &[f64], stride: usize, padding: usize) -> Result<FeatureMap> {
    let mut y = correlate(x, w, stride, padding)?;
    add_bias(&mut y, bias)?;
    Ok(y)
}

/// Transpose convolution forward with the output size `(n - 1) s - 2p + k`.
/// `w` is read as a correlation kernel from the output channels to the
/// input channels, which makes this the adjoint of [`conv2d`] with the
/// same kernel.
pub fn transpose_conv2d(y: &FeatureMap, w: &Kernel, bias: &[f64], stride: usize, padding: usize) -> Result<FeatureMap> {
    let h = transpose_out_size(y.height, w.k, stride, padding)?;
    let wd = transpose_out_size(y.width, w.k, stride, padding)?;
    let mut x = scatter(y, w, stride, padding, h, wd)?;
    add_bias(&mut x, bias)?;
    Ok(x)
}

fn add_bias(y: &mut FeatureMap, bias: &[f64]) -> Result<()> {
    if bias.is_empty() {
        return Ok(());
    }
    if bias.len() != y.channels {
        return Err(Error::Dimension(format!(
            "bias has {} entries for {} channels",
            bias.len(),
            y.channels
        )));
    }
    let n = y.height * y.width;
    for (c, b) in bias.iter().enumerate() {
        for v in &mut y.data[c * n..(c + 1) * n] {
            *v += b;
        }
    }
    Ok(())
}

/// Per-channel sums, the bias gradient.
pub fn channel_sums(g: &FeatureMap) -> Vec<f64> {
    (0..g.channels).map(|c| g.channel_slice(c).iter().sum()).collect()
}

#[inline]
pub fn silu(z: f64) -> f64 {
    z * crate::losses::sigmoid(z)
}

#[inline]
pub fn silu_grad(z: f64) -> f64 {
    let s = crate::losses::sigmoid(z);
    s * (1.0 + z * (1.0 - s))
}
