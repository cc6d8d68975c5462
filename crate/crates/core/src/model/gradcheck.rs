//! Central finite-difference checks for the analytic gradients.

use super::network::{loss_and_grad_map, loss_map, ModelConfig, Params, Targets};
use super::FeatureMap;
use crate::losses::LossWeights;
use crate::Result;

/// Denominator floor for the relative error, so that entries whose true
/// gradient is zero are compared absolutely.
pub const RELATIVE_FLOOR: f64 = 1e-6;

/// `|a - n| / max(|a|, |n|, RELATIVE_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Central difference of `f` at every coordinate of `x`.
pub fn numeric_gradient(x: &[f64], step: f64, mut f: impl FnMut(&[f64]) -> Result<f64>) -> Result<Vec<f64>> {
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        probe[k] = x[k] + step;
        let up = f(&probe)?;
        probe[k] = x[k] - step;
        let down = f(&probe)?;
        probe[k] = x[k];
        out.push((up - down) / (2.0 * step));
    }
    Ok(out)
}

/// Largest relative error between two gradient vectors, with its index.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> (f64, usize) {
    analytic
        .iter()
        .zip(numeric)
        .enumerate()
        .map(|(k, (&a, &n))| (relative_error(a, n), k))
        .fold((0.0, 0), |best, cur| if cur.0 > best.0 { cur } else { best })
}

/// Worst relative error found for one tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub max_relative_error: f64,
    pub worst_index: usize,
}

/// Checks every parameter tensor and the input of the full model loss.
pub fn check_model(
    config: &ModelConfig,
    params: &Params,
    input: &FeatureMap,
    targets: &Targets,
    weights: &LossWeights,
    step: f64,
) -> Result<Vec<TensorCheck>> {
    let eval = loss_and_grad_map(config, params, input.clone(), targets, weights)?;
    let layout = params.layout();
    let analytic = eval.grads.buffers();
    let mut report = Vec::with_capacity(layout.len() + 1);
    for (slot, (name, _)) in layout.iter().enumerate() {
        let base = params.buffers()[slot].clone();
        let numeric = numeric_gradient(&base, step, |probe| {
            let mut p = params.clone();
            p.buffers_mut()[slot].copy_from_slice(probe);
            Ok(loss_map(config, &p, input.clone(), targets, weights)?.1)
        })?;
        let (err, idx) = max_relative_error(analytic[slot], &numeric);
        report.push(TensorCheck {
            name: name.clone(),
            max_relative_error: err,
            worst_index: idx,
        });
    }
    let numeric = numeric_gradient(&input.data, step, |probe| {
        let x = FeatureMap {
            data: probe.to_vec(),
            ..input.clone()
        };
        Ok(loss_map(config, params, x, targets, weights)?.1)
    })?;
    let (err, idx) = max_relative_error(&eval.input_grad.data, &numeric);
    report.push(TensorCheck {
        name: "input".into(),
        max_relative_error: err,
        worst_index: idx,
    });
    Ok(report)
}
