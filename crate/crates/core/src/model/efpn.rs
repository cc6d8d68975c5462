//! Weighted top-down pyramid fusion.
//!
//! For a level `l` with features `F` and the already-fused coarser level
//! `F'_{l+1}`, the upsampled context is `E = T(f(F'_{l+1}))` (a convolution
//! `f` followed by a stride-2 transpose convolution `T`) and the fused map is
//!
//! ```text
//! F'_l = concat(F * (1 - sigmoid(E))^gamma_w, E)
//! ```
//!
//! Pixels the coarser level already responds to strongly are damped in `F`
//! before concatenation.

use serde::{Deserialize, Serialize};

use super::ops::{conv2d, transpose_conv2d, Kernel};
use super::FeatureMap;
use crate::losses::sigmoid;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfpnConfig {
    /// Exponent of the suppression mask; 0 turns fusion into plain concatenation.
    pub gamma_w: f64,
    /// Side of the convolution applied to the coarser level (stride 1, same padding).
    pub reduce_kernel: usize,
    /// Side of the stride-2 transpose convolution; padding is `(k - 2) / 2`
    /// so the spatial size exactly doubles.
    pub up_kernel: usize,
}

impl Default for EfpnConfig {
    fn default() -> Self {
        Self {
            gamma_w: 1.0,
            reduce_kernel: 3,
            up_kernel: 4,
        }
    }
}

impl EfpnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_w >= 0.0) {
            return Err(Error::Config("gamma_w must be non-negative".into()));
        }
        if self.reduce_kernel.is_multiple_of(2) {
            return Err(Error::Config("reduce kernel must be odd".into()));
        }
        if self.up_kernel < 2 || !self.up_kernel.is_multiple_of(2) {
            return Err(Error::Config("up kernel must be even and at least 2".into()));
        }
        Ok(())
    }

    pub fn reduce_padding(&self) -> usize {
        self.reduce_kernel / 2
    }

    pub fn up_padding(&self) -> usize {
        (self.up_kernel - 2) / 2
    }
}

/// Learned operators of one fusion step.
#[derive(Clone, Debug, PartialEq)]
pub struct FusionWeights {
    pub reduce: Kernel,
    pub reduce_bias: Vec<f64>,
    /// Read as a correlation kernel from the fused output channels to the
    /// reduced channels (see [`transpose_conv2d`]).
    pub up: Kernel,
    pub up_bias: Vec<f64>,
}

/// Intermediate values kept for the backward pass.
#[derive(Clone, Debug)]
pub struct FusionTrace {
    pub reduced: FeatureMap,
    pub context: FeatureMap,
}

/// Upsampled context `E = T(f(coarser))`.
pub fn upsample_context(coarser: &FeatureMap, config: &EfpnConfig, weights: &FusionWeights) -> Result<FusionTrace> {
    let reduced = conv2d(
        coarser,
        &weights.reduce,
        &weights.reduce_bias,
        1,
        config.reduce_padding(),
    )?;
    let context = transpose_conv2d(&reduced, &weights.up, &weights.up_bias, 2, config.up_padding())?;
    Ok(FusionTrace { reduced, context })
}

/// Suppression weight `(1 - sigmoid(e))^gamma` and its derivative in `e`.
#[inline]
fn suppression(e: f64, gamma: f64) -> (f64, f64) {
    if gamma == 0.0 {
        return (1.0, 0.0);
    }
    let s = sigmoid(e);
    let q = 1.0 - s;
    let w = q.powf(gamma);
    (w, -gamma * s * w)
}

/// `concat(F * (1 - sigmoid(E))^gamma, E)`; `E` must have `F`'s spatial size
/// and either the same channel count or a single channel (broadcast).
pub fn weighted_concat(level: &FeatureMap, context: &FeatureMap, gamma_w: f64) -> Result<FeatureMap> {
    check_fusable(level, context)?;
    let n = level.height * level.width;
    let mut weighted = level.clone();
    for c in 0..level.channels {
        let ec = if context.channels == 1 { 0 } else { c };
        let e = context.channel_slice(ec);
        for (k, v) in weighted.data[c * n..(c + 1) * n].iter_mut().enumerate() {
            *v *= suppression(e[k], gamma_w).0;
        }
    }
    weighted.concat(context)
}

/// Gradients of [`weighted_concat`] with respect to `level` and `context`.
pub fn weighted_concat_backward(
    level: &FeatureMap,
    context: &FeatureMap,
    gamma_w: f64,
    grad_out: &FeatureMap,
) -> Result<(FeatureMap, FeatureMap)> {
    check_fusable(level, context)?;
    if grad_out.shape() != (level.channels + context.channels, level.height, level.width) {
        return Err(Error::Dimension("fusion gradient has the wrong shape".into()));
    }
    let n = level.height * level.width;
    let (g_weighted, mut g_context) = grad_out.split(level.channels);
    let mut g_level = FeatureMap::zeros(level.channels, level.height, level.width);
    for c in 0..level.channels {
        let ec = if context.channels == 1 { 0 } else { c };
        for k in 0..n {
            let e = context.data[ec * n + k];
            let (w, dw) = suppression(e, gamma_w);
            let g = g_weighted.data[c * n + k];
            g_level.data[c * n + k] = g * w;
            g_context.data[ec * n + k] += g * level.data[c * n + k] * dw;
        }
    }
    Ok((g_level, g_context))
}

fn check_fusable(level: &FeatureMap, context: &FeatureMap) -> Result<()> {
    if (level.height, level.width) != (context.height, context.width) {
        return Err(Error::Dimension(format!(
            "upsampled context {:?} does not match level {:?}",
            context.shape(),
            level.shape()
        )));
    }
    if context.channels != level.channels && context.channels != 1 {
        return Err(Error::Dimension(format!(
            "context has {} channels, level has {}",
            context.channels, level.channels
        )));
    }
    Ok(())
}

/// One full fusion step: `F'_l` from `F_l` and the fused coarser level.
pub fn efpn_fuse(
    level: &FeatureMap,
    coarser_fused: &FeatureMap,
    config: &EfpnConfig,
    weights: &FusionWeights,
) -> Result<FeatureMap> {
    config.validate()?;
    let trace = upsample_context(coarser_fused, config, weights)?;
    weighted_concat(level, &trace.context, config.gamma_w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;

    fn random_map(s: &mut SeedStream, c: usize, h: usize, w: usize) -> FeatureMap {
        FeatureMap::new(c, h, w, (0..c * h * w).map(|_| s.normal()).collect()).unwrap()
    }

    fn random_weights(s: &mut SeedStream, coarse_ch: usize, out_ch: usize) -> FusionWeights {
        let mut k = |o, i, k| Kernel::new(o, i, k, (0..o * i * k * k).map(|_| 0.3 * s.normal()).collect()).unwrap();
        FusionWeights {
            reduce: k(out_ch, coarse_ch, 3),
            reduce_bias: vec![0.1; out_ch],
            up: k(out_ch, out_ch, 4),
            up_bias: vec![-0.1; out_ch],
        }
    }

    #[test]
    fn gamma_zero_is_plain_concat() {
        let mut s = SeedStream::new(1);
        let level = random_map(&mut s, 4, 8, 8);
        let coarse = random_map(&mut s, 6, 4, 4);
        let w = random_weights(&mut s, 6, 4);
        let cfg = EfpnConfig {
            gamma_w: 0.0,
            ..EfpnConfig::default()
        };
        let fused = efpn_fuse(&level, &coarse, &cfg, &w).unwrap();
        let ctx = upsample_context(&coarse, &cfg, &w).unwrap().context;
        assert_eq!(fused, level.concat(&ctx).unwrap());
    }

    #[test]
    fn shapes_and_channel_bookkeeping() {
        let mut s = SeedStream::new(2);
        let level = random_map(&mut s, 4, 8, 8);
        let coarse = random_map(&mut s, 6, 4, 4);
        let w = random_weights(&mut s, 6, 4);
        let cfg = EfpnConfig::default();
        let ctx = upsample_context(&coarse, &cfg, &w).unwrap().context;
        assert_eq!(ctx.shape(), level.shape());
        let fused = efpn_fuse(&level, &coarse, &cfg, &w).unwrap();
        assert_eq!(fused.channels, level.channels + ctx.channels);
    }

    #[test]
    fn scalar_substitution() {
        let f = FeatureMap::new(1, 1, 1, vec![2.0]).unwrap();
        let e = FeatureMap::new(1, 1, 1, vec![0.0]).unwrap();
        let out = weighted_concat(&f, &e, 1.0).unwrap();
        assert_eq!(out.data, vec![1.0, 0.0]);
    }

    #[test]
    fn saturated_context_suppresses_level() {
        let mut s = SeedStream::new(3);
        let f = random_map(&mut s, 2, 3, 3);
        let e = FeatureMap::new(2, 3, 3, vec![60.0; 18]).unwrap();
        let out = weighted_concat(&f, &e, 1.0).unwrap();
        assert!(out.data[..18].iter().all(|v| v.abs() < 1e-20));
        assert_eq!(&out.data[18..], e.data.as_slice());
    }

    #[test]
    fn mismatched_context_rejected() {
        let f = FeatureMap::zeros(2, 4, 4);
        assert!(weighted_concat(&f, &FeatureMap::zeros(2, 3, 4), 1.0).is_err());
        assert!(weighted_concat(&f, &FeatureMap::zeros(3, 4, 4), 1.0).is_err());
        let cfg = EfpnConfig::default();
        let mut s = SeedStream::new(4);
        let w = random_weights(&mut s, 5, 2);
        // coarse 3x3 upsamples to 6x6, not 4x4
        assert!(matches!(
            efpn_fuse(&f, &FeatureMap::zeros(5, 3, 3), &cfg, &w),
            Err(Error::Dimension(_))
        ));
    }
}
