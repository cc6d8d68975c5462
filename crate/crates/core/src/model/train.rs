//! SGD training of the toy detector.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::network::{forward_map, loss_and_grad_map, ModelConfig, ModelOutput, Params, Targets, HEAD_STRIDE};
use super::FeatureMap;
use crate::eval::auc;
use crate::labels::VulnerablePointSet;
use crate::losses::{LossParts, LossWeights};
use crate::rng::SeedStream;
use crate::synth::{materialize, FaceStore, GroundTruthBundle, SampleRecord, SynthConfig};
use crate::{Error, Result};

/// Optimizer and schedule settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub epochs: usize,
    pub batch_size: usize,
    /// Learning rate at the start of warmup.
    pub lr_start: f64,
    /// Peak learning rate, reached after the first quarter of all steps.
    pub lr_peak: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub seed: u64,
    /// Add a mirrored copy of every training sample.
    pub hflip: bool,
    /// Per-epoch photometric jitter of the training inputs: every channel gets
    /// a gain in `1 ± color_jitter` and an offset in `± color_jitter / 2`.
    pub color_jitter: f64,
    /// Standard deviation of per-epoch additive Gaussian input noise.
    pub noise_std: f64,
    /// Rescale each batch gradient to at most this global L2 norm.
    pub clip_norm: Option<f64>,
    pub loss: LossWeights,
    pub model: ModelConfig,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            epochs: 60,
            batch_size: 16,
            lr_start: 0.0075,
            lr_peak: 0.03,
            momentum: 0.9,
            weight_decay: 1e-4,
            seed: 0,
            hflip: true,
            color_jitter: 0.0,
            noise_std: 0.0,
            clip_norm: Some(5.0),
            loss: LossWeights::default(),
            model: ModelConfig::default(),
        }
    }
}

impl Hyper {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be positive".into()));
        }
        if !(self.lr_start >= 0.0 && self.lr_peak >= 0.0) {
            return Err(Error::Config("learning rates must be non-negative".into()));
        }
        if !(self.color_jitter >= 0.0 && self.noise_std >= 0.0) {
            return Err(Error::Config("augmentation strengths must be non-negative".into()));
        }
        if self.clip_norm.is_some_and(|c| !(c > 0.0)) {
            return Err(Error::Config("gradient clip norm must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) || !(self.weight_decay >= 0.0) {
            return Err(Error::Config(
                "momentum must lie in [0, 1) and weight decay be non-negative".into(),
            ));
        }
        self.loss.validate()?;
        self.model.validate()
    }
}

/// Learning rate at `step` of `total`: linear rise from `start` to `peak` over
/// the first quarter, then linear decay to zero.
pub fn learning_rate(step: usize, total: usize, start: f64, peak: f64) -> f64 {
    let warm = (total / 4).max(1);
    if step < warm {
        start + (peak - start) * step as f64 / warm as f64
    } else {
        let rest = (total - warm).max(1);
        peak * (total.saturating_sub(step)) as f64 / rest as f64
    }
}

/// A bundle reduced to what training needs: the centred input and the
/// head-resolution targets.
#[derive(Clone, Debug)]
pub struct TrainSample {
    pub input: FeatureMap,
    pub targets: Targets,
    /// Vulnerable points at head resolution.
    pub points: VulnerablePointSet,
    pub seed: u64,
}

impl TrainSample {
    /// Targets are regenerated at head resolution; the consistency anchor is
    /// drawn from `seed`.
    pub fn from_bundle(bundle: &GroundTruthBundle, seed: u64, iou_threshold: f64) -> Result<Self> {
        let mut rng = SeedStream::new(seed).fork("head-anchor");
        let (heatmap, consistency, points) = bundle.targets_at(HEAD_STRIDE, iou_threshold, &mut rng)?;
        Ok(Self {
            input: FeatureMap::from_image(&bundle.image),
            targets: Targets {
                heatmap: heatmap.into_plane(),
                consistency: consistency.into_plane(),
                label: bundle.label,
            },
            points,
            seed,
        })
    }
}

/// Materializes records into training samples in record order.
pub fn prepare_samples(
    records: &[SampleRecord],
    store: &FaceStore,
    synth: &SynthConfig,
    hflip: bool,
) -> Result<Vec<TrainSample>> {
    let per_record: Vec<Vec<TrainSample>> = records
        .par_iter()
        .map(|r| {
            let bundle = materialize(r, store, synth)?;
            let mut out = vec![TrainSample::from_bundle(&bundle, r.seed, synth.iou_threshold)?];
            if hflip {
                out.push(TrainSample::from_bundle(
                    &bundle.hflip(),
                    r.seed ^ 1,
                    synth.iou_threshold,
                )?);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(per_record.into_iter().flatten().collect())
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
    pub bce: f64,
    pub heatmap: f64,
    pub consistency: f64,
    /// `None` when the validation set lacks a class.
    pub val_auc: Option<f64>,
    /// Mean heatmap prediction over every vulnerable point of the fake
    /// validation samples.
    pub val_heat_at_points: Option<f64>,
}

/// Serializes a log as JSON Lines.
pub fn log_to_jsonl(log: &[EpochLog]) -> Result<String> {
    let mut out = String::new();
    for entry in log {
        out.push_str(&serde_json::to_string(entry)?);
        out.push('\n');
    }
    Ok(out)
}

pub struct TrainOutcome {
    pub params: Params,
    pub log: Vec<EpochLog>,
}

/// Runs the model on every sample.
pub fn predict(config: &ModelConfig, params: &Params, samples: &[TrainSample]) -> Result<Vec<ModelOutput>> {
    samples
        .par_iter()
        .map(|s| forward_map(config, params, s.input.clone()).map(|(out, _)| out))
        .collect()
}

/// Pooled mean of the predicted heatmap at ground-truth vulnerable points.
pub fn heat_at_points(outputs: &[ModelOutput], samples: &[TrainSample]) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (out, s) in outputs.iter().zip(samples) {
        for &(i, j) in s.points.points() {
            sum += out.heatmap.get(i, j);
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Validation AUC over sigmoid scores; `None` for a single-class set.
pub fn scores_auc(outputs: &[ModelOutput], samples: &[TrainSample]) -> Option<f64> {
    let scores: Vec<f64> = outputs.iter().map(ModelOutput::score).collect();
    let labels: Vec<u8> = samples.iter().map(|s| s.targets.label).collect();
    auc(&scores, &labels).ok()
}

/// Minimizes the weighted total loss by SGD with momentum.
pub fn train_toy(train: &[TrainSample], val: &[TrainSample], hyper: &Hyper) -> Result<TrainOutcome> {
    hyper.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyInput("no training samples".into()));
    }
    let config = &hyper.model;
    let root = SeedStream::new(hyper.seed);
    let mut params = Params::init(config, root.fork("init").next_u64())?;
    let mut velocity = Params::zeros(config);
    let batches = train.len().div_ceil(hyper.batch_size);
    let total_steps = hyper.epochs * batches;
    let mut log = Vec::with_capacity(hyper.epochs);
    let mut step = 0;
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 0..hyper.epochs {
        root.fork("order").split(epoch as u64).shuffle(&mut order);
        let mut sums = LossParts::default();
        let mut total = 0.0;
        let mut lr = 0.0;
        for (b, chunk) in order.chunks(hyper.batch_size).enumerate() {
            let evals: Vec<_> = chunk
                .par_iter()
                .map(|&k| {
                    let mut rng = root.fork("augment").split(epoch as u64).split(k as u64);
                    let input = photometric(&train[k].input, hyper.color_jitter, hyper.noise_std, &mut rng);
                    loss_and_grad_map(config, &params, input, &train[k].targets, &hyper.loss)
                })
                .collect::<Result<_>>()
                .map_err(|e| match e {
                    Error::Numeric(msg) => {
                        let seeds: Vec<u64> = chunk.iter().map(|&k| train[k].seed).collect();
                        Error::Numeric(format!("{msg} at epoch {epoch}, batch {b}; batch seeds {seeds:?}"))
                    }
                    other => other,
                })?;
            if let Some(bad) = evals.iter().position(|e| !e.total.is_finite()) {
                let seeds: Vec<u64> = chunk.iter().map(|&k| train[k].seed).collect();
                return Err(Error::Numeric(format!(
                    "non-finite loss at epoch {epoch}, batch {b} (sample seed {}); batch seeds {seeds:?}",
                    train[chunk[bad]].seed
                )));
            }
            let mut grad = Params::zeros(config);
            for e in &evals {
                grad.axpy(1.0, &e.grads);
                sums.bce += e.parts.bce;
                sums.heatmap += e.parts.heatmap;
                sums.consistency += e.parts.consistency;
                total += e.total;
            }
            let mut scale = 1.0 / chunk.len() as f64;
            if let Some(max_norm) = hyper.clip_norm {
                let norm = scale * grad.norm();
                if norm > max_norm {
                    scale *= max_norm / norm;
                }
            }
            lr = learning_rate(step, total_steps, hyper.lr_start, hyper.lr_peak);
            sgd_step(&mut params, &mut velocity, &grad, scale, lr, hyper);
            if !params.all_finite() {
                let seeds: Vec<u64> = chunk.iter().map(|&k| train[k].seed).collect();
                return Err(Error::Numeric(format!(
                    "parameters diverged at epoch {epoch}, batch {b}; batch seeds {seeds:?}"
                )));
            }
            step += 1;
        }
        let n = train.len() as f64;
        let (val_auc, val_heat) = if val.is_empty() {
            (None, None)
        } else {
            let outputs = predict(config, &params, val)?;
            (scores_auc(&outputs, val), heat_at_points(&outputs, val))
        };
        log.push(EpochLog {
            epoch,
            lr,
            loss: total / n,
            bce: sums.bce / n,
            heatmap: sums.heatmap / n,
            consistency: sums.consistency / n,
            val_auc,
            val_heat_at_points: val_heat,
        });
    }
    Ok(TrainOutcome { params, log })
}

/// Random per-channel gain and offset plus Gaussian noise; the identity when
/// both strengths are zero.
fn photometric(input: &FeatureMap, jitter: f64, noise: f64, rng: &mut SeedStream) -> FeatureMap {
    if jitter == 0.0 && noise == 0.0 {
        return input.clone();
    }
    let plane = input.height * input.width;
    let mut out = input.clone();
    for c in 0..input.channels {
        let gain = 1.0 + rng.range(-jitter, jitter);
        let offset = rng.range(-jitter / 2.0, jitter / 2.0);
        for v in &mut out.data[c * plane..(c + 1) * plane] {
            *v = gain * *v + offset;
        }
    }
    if noise > 0.0 {
        for v in &mut out.data {
            *v += noise * rng.normal();
        }
    }
    out
}

fn sgd_step(params: &mut Params, velocity: &mut Params, grad: &Params, scale: f64, lr: f64, hyper: &Hyper) {
    let g = grad.buffers();
    let p_bufs = params.buffers_mut();
    for ((p, v), g) in p_bufs.into_iter().zip(velocity.buffers_mut()).zip(g) {
        for ((p, v), g) in p.iter_mut().zip(v.iter_mut()).zip(g) {
            *v = hyper.momentum * *v + scale * g + hyper.weight_decay * *p;
            *p -= lr * *v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::Plane;

    fn tiny_samples(n: usize) -> Vec<TrainSample> {
        (0..n)
            .map(|k| {
                let mut s = SeedStream::new(k as u64);
                let label = (k % 2) as u8;
                let input = FeatureMap::new(3, 16, 16, (0..768).map(|_| s.uniform() - 0.5).collect()).unwrap();
                let heat = Plane::from_fn(4, 4, |i, j| if label == 1 && (i, j) == (2, 2) { 1.0 } else { 0.0 });
                TrainSample {
                    input,
                    targets: Targets {
                        heatmap: heat,
                        consistency: Plane::filled(4, 4, 1.0),
                        label,
                    },
                    points: VulnerablePointSet::default(),
                    seed: k as u64,
                }
            })
            .collect()
    }

    fn tiny_hyper() -> Hyper {
        Hyper {
            epochs: 2,
            batch_size: 3,
            model: ModelConfig {
                channels: [2, 3, 3, 4],
                ..ModelConfig::default()
            },
            ..Hyper::default()
        }
    }

    #[test]
    fn schedule_shape() {
        let total = 100;
        assert_eq!(learning_rate(0, total, 0.1, 0.4), 0.1);
        assert_eq!(learning_rate(25, total, 0.1, 0.4), 0.4);
        assert!(learning_rate(10, total, 0.1, 0.4) < learning_rate(20, total, 0.1, 0.4));
        assert!(learning_rate(60, total, 0.1, 0.4) > learning_rate(80, total, 0.1, 0.4));
        assert_eq!(learning_rate(100, total, 0.1, 0.4), 0.0);
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let samples = tiny_samples(6);
        let hyper = Hyper {
            lr_start: 0.0,
            lr_peak: 0.0,
            weight_decay: 0.0,
            ..tiny_hyper()
        };
        let out = train_toy(&samples, &[], &hyper).unwrap();
        let init = Params::init(&hyper.model, SeedStream::new(hyper.seed).fork("init").next_u64()).unwrap();
        assert_eq!(out.params, init);
        // summation order follows the shuffle, so equal up to rounding
        assert!((out.log[0].loss - out.log[1].loss).abs() <= 1e-12 * out.log[0].loss.abs());
    }

    #[test]
    fn identical_seeds_identical_logs() {
        let samples = tiny_samples(8);
        let a = train_toy(&samples, &samples, &tiny_hyper()).unwrap();
        let b = train_toy(&samples, &samples, &tiny_hyper()).unwrap();
        assert_eq!(log_to_jsonl(&a.log).unwrap(), log_to_jsonl(&b.log).unwrap());
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn bad_hyper_rejected() {
        let samples = tiny_samples(2);
        let hyper = Hyper {
            batch_size: 0,
            ..tiny_hyper()
        };
        assert!(matches!(train_toy(&samples, &[], &hyper), Err(Error::Config(_))));
    }
}
