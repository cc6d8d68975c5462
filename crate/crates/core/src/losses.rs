//! Training objectives: focal heatmap loss, self-consistency BCE,
//! label-smoothed classification BCE and their weighted sum.
//!
//! Each loss has a matching `*_grad` returning the derivative with respect to
//! its prediction input (probabilities for the dense losses, the logit for
//! classification).

use serde::{Deserialize, Serialize};

use crate::imaging::Plane;
use crate::{Error, Result};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before logs.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Heatmap loss weight.
    pub lambda1: f64,
    /// Consistency loss weight.
    pub lambda2: f64,
    /// Focal exponent.
    pub gamma: f64,
    /// Label smoothing for the classification target, in `[0, 0.5)`.
    pub smoothing_eps: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda1: 10.0,
            lambda2: 100.0,
            gamma: 2.0,
            smoothing_eps: 0.1,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return Err(Error::Config("loss weights must be non-negative".into()));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::Config("focal gamma must be non-negative".into()));
        }
        if !(0.0..0.5).contains(&self.smoothing_eps) {
            return Err(Error::Config("label smoothing must lie in [0, 0.5)".into()));
        }
        Ok(())
    }
}

/// The three loss terms for one sample.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub bce: f64,
    pub heatmap: f64,
    pub consistency: f64,
}

fn check_pair(pred: &Plane, target: &Plane, what: &str) -> Result<()> {
    if pred.dims() != target.dims() {
        return Err(Error::Dimension(format!(
            "{what}: prediction {:?} vs target {:?}",
            pred.dims(),
            target.dims()
        )));
    }
    if let Some(v) = pred.data().iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
        return Err(Error::Domain(format!("{what}: prediction {v} outside (0, 1)")));
    }
    Ok(())
}

#[inline]
fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Focal heatmap loss summed over pixels. Pixels whose target is exactly 1
/// are positives (`h~ = h^`); every other pixel is a negative (`h~ = 1 - h^`).
pub fn focal_heatmap_loss(pred: &Plane, target: &Plane, gamma: f64) -> Result<f64> {
    check_pair(pred, target, "heatmap")?;
    Ok(pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &h)| {
            let p = clamp_prob(p);
            let t = if h == 1.0 { p } else { 1.0 - p };
            -(1.0 - t).powf(gamma) * t.ln()
        })
        .sum())
}

/// Derivative of [`focal_heatmap_loss`] with respect to each prediction.
/// Zero where the clamp is active.
pub fn focal_heatmap_grad(pred: &Plane, target: &Plane, gamma: f64) -> Result<Plane> {
    check_pair(pred, target, "heatmap")?;
    let data = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &h)| {
            if !(PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) {
                return 0.0;
            }
            let (t, sign) = if h == 1.0 { (p, 1.0) } else { (1.0 - p, -1.0) };
            // d/dt of -(1-t)^g ln t
            let q = 1.0 - t;
            let dt = if gamma == 0.0 {
                -1.0 / t
            } else {
                gamma * q.powf(gamma - 1.0) * t.ln() - q.powf(gamma) / t
            };
            sign * dt
        })
        .collect();
    Plane::new(pred.height(), pred.width(), data)
}

/// Mean binary cross-entropy between predicted and target consistency.
pub fn consistency_loss(pred: &Plane, target: &Plane) -> Result<f64> {
    check_pair(pred, target, "consistency")?;
    let n = pred.data().len() as f64;
    Ok(pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &c)| {
            let p = clamp_prob(p);
            -(c * p.ln() + (1.0 - c) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / n)
}

pub fn consistency_grad(pred: &Plane, target: &Plane) -> Result<Plane> {
    check_pair(pred, target, "consistency")?;
    let n = pred.data().len() as f64;
    let data = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &c)| {
            if !(PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) {
                return 0.0;
            }
            (-c / p + (1.0 - c) / (1.0 - p)) / n
        })
        .collect();
    Plane::new(pred.height(), pred.width(), data)
}

/// Smoothed target for a binary label: `1 - eps` for fakes, `eps` for reals.
pub fn smoothed_target(label: u8, smoothing_eps: f64) -> f64 {
    if label == 1 {
        1.0 - smoothing_eps
    } else {
        smoothing_eps
    }
}

/// BCE on `sigmoid(logit)` against the smoothed label, in the overflow-free
/// form `max(z, 0) - y z + ln(1 + e^-|z|)`.
pub fn classification_loss(logit: f64, label: u8, smoothing_eps: f64) -> f64 {
    let y = smoothed_target(label, smoothing_eps);
    logit.max(0.0) - y * logit + (-logit.abs()).exp().ln_1p()
}

pub fn classification_grad(logit: f64, label: u8, smoothing_eps: f64) -> f64 {
    sigmoid(logit) - smoothed_target(label, smoothing_eps)
}

/// `L = L_bce + lambda1 L_h + lambda2 L_c`.
pub fn total_loss(parts: &LossParts, weights: &LossWeights) -> f64 {
    parts.bce + weights.lambda1 * parts.heatmap + weights.lambda2 * parts.consistency
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
