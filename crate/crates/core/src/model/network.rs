//! A four-level convolutional detector with weighted top-down fusion and
//! three heads (classification, heatmap, consistency).
//!
//! ```text
//! image (S)  -> stem s2 -> F1 (S/2) -> F2 (S/4) -> F3 (S/8) -> F4 (S/16)
//! F'3 = fuse(F3, F4);  F'2 = fuse(F2, F'3)
//! heads on F'2: 1x1 conv + sigmoid (heatmap, consistency), mean pool + affine (logit)
//! ```

use serde::{Deserialize, Serialize};

use super::efpn::{
    upsample_context, weighted_concat, weighted_concat_backward, EfpnConfig, FusionTrace, FusionWeights,
};
use super::ops::{channel_sums, conv2d, correlate, kernel_grad, scatter, silu, silu_grad, Kernel};
use super::FeatureMap;
use crate::imaging::{Image, Plane};
use crate::losses::{
    classification_grad, classification_loss, consistency_grad, consistency_loss, focal_heatmap_grad,
    focal_heatmap_loss, sigmoid, total_loss, LossParts, LossWeights, PROB_CLAMP,
};
use crate::rng::SeedStream;
use crate::{Error, Result};

/// Backbone depth; the pyramid holds levels 2..=LEVELS.
pub const LEVELS: usize = 4;
/// Input side must be a multiple of this (four stride-2 stages).
pub const INPUT_MULTIPLE: usize = 16;
/// Heads run at `1 / HEAD_STRIDE` of the input resolution.
pub const HEAD_STRIDE: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Channels of F1..F4.
    pub channels: [usize; LEVELS],
    pub efpn: EfpnConfig,
    pub in_channels: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            channels: [8, 16, 24, 32],
            efpn: EfpnConfig::default(),
            in_channels: 3,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels.contains(&0) || self.in_channels == 0 {
            return Err(Error::Config("channel counts must be positive".into()));
        }
        self.efpn.validate()
    }

    /// Channels of the fused map feeding the heads.
    pub fn head_channels(&self) -> usize {
        2 * self.channels[1]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weight: Kernel,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(out_ch: usize, in_ch: usize, k: usize) -> Self {
        Self {
            weight: Kernel::zeros(out_ch, in_ch, k),
            bias: vec![0.0; out_ch],
        }
    }

    fn init(out_ch: usize, in_ch: usize, k: usize, gain: f64, fan_in: usize, rng: &mut SeedStream) -> Self {
        let std = (gain / fan_in as f64).sqrt();
        let n = out_ch * in_ch * k * k;
        Self {
            weight: Kernel::new(out_ch, in_ch, k, (0..n).map(|_| std * rng.normal()).collect()).expect("size"),
            bias: vec![0.0; out_ch],
        }
    }
}

/// All learnable tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub stem: Layer,
    pub block2: Layer,
    pub block3: Layer,
    pub block4: Layer,
    pub fuse3: FusionWeights,
    pub fuse2: FusionWeights,
    pub heat: Layer,
    pub cons: Layer,
    pub cls: Layer,
}

fn fusion_zeros(coarse_ch: usize, out_ch: usize, cfg: &EfpnConfig) -> FusionWeights {
    FusionWeights {
        reduce: Kernel::zeros(out_ch, coarse_ch, cfg.reduce_kernel),
        reduce_bias: vec![0.0; out_ch],
        up: Kernel::zeros(out_ch, out_ch, cfg.up_kernel),
        up_bias: vec![0.0; out_ch],
    }
}

impl Params {
    /// Same shapes as `config`, every value zero.
    pub fn zeros(config: &ModelConfig) -> Self {
        let [c1, c2, c3, c4] = config.channels;
        let e = &config.efpn;
        Self {
            stem: Layer::zeros(c1, config.in_channels, 3),
            block2: Layer::zeros(c2, c1, 3),
            block3: Layer::zeros(c3, c2, 3),
            block4: Layer::zeros(c4, c3, 3),
            fuse3: fusion_zeros(c4, c3, e),
            fuse2: fusion_zeros(2 * c3, c2, e),
            heat: Layer::zeros(1, 2 * c2, 1),
            cons: Layer::zeros(1, 2 * c2, 1),
            cls: Layer::zeros(1, 2 * c2, 1),
        }
    }

    /// Fan-in scaled Gaussian initialization from `seed`.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = SeedStream::new(seed);
        let [c1, c2, c3, c4] = config.channels;
        let e = &config.efpn;
        let rk = e.reduce_kernel;
        let uk = e.up_kernel;
        let fusion = |coarse: usize, out: usize, rng: &mut SeedStream| {
            let reduce = Layer::init(out, coarse, rk, 1.0, coarse * rk * rk, rng);
            // each transpose-conv output sees (k/2)^2 taps per input channel
            let up = Layer::init(out, out, uk, 1.0, out * (uk / 2) * (uk / 2), rng);
            FusionWeights {
                reduce: reduce.weight,
                reduce_bias: reduce.bias,
                up: up.weight,
                up_bias: up.bias,
            }
        };
        let mut p = Self {
            stem: Layer::init(c1, config.in_channels, 3, 2.0, config.in_channels * 9, &mut rng),
            block2: Layer::init(c2, c1, 3, 2.0, c1 * 9, &mut rng),
            block3: Layer::init(c3, c2, 3, 2.0, c2 * 9, &mut rng),
            block4: Layer::init(c4, c3, 3, 2.0, c3 * 9, &mut rng),
            fuse3: fusion(c4, c3, &mut rng),
            fuse2: fusion(2 * c3, c2, &mut rng),
            heat: Layer::init(1, 2 * c2, 1, 1.0, 2 * c2, &mut rng),
            cons: Layer::init(1, 2 * c2, 1, 1.0, 2 * c2, &mut rng),
            cls: Layer::init(1, 2 * c2, 1, 1.0, 2 * c2, &mut rng),
        };
        // heatmap positives are rare: start the head near p = 0.01
        p.heat.bias[0] = -(99.0f64).ln();
        Ok(p)
    }

    /// Tensor names and shapes in serialization order.
    pub fn layout(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        let mut conv = |name: &str, w: &Kernel, b: &[f64]| {
            out.push((format!("{name}.weight"), vec![w.out_ch, w.in_ch, w.k, w.k]));
            out.push((format!("{name}.bias"), vec![b.len()]));
        };
        conv("stem", &self.stem.weight, &self.stem.bias);
        conv("block2", &self.block2.weight, &self.block2.bias);
        conv("block3", &self.block3.weight, &self.block3.bias);
        conv("block4", &self.block4.weight, &self.block4.bias);
        conv("fuse3.reduce", &self.fuse3.reduce, &self.fuse3.reduce_bias);
        conv("fuse3.up", &self.fuse3.up, &self.fuse3.up_bias);
        conv("fuse2.reduce", &self.fuse2.reduce, &self.fuse2.reduce_bias);
        conv("fuse2.up", &self.fuse2.up, &self.fuse2.up_bias);
        conv("heat", &self.heat.weight, &self.heat.bias);
        conv("cons", &self.cons.weight, &self.cons.bias);
        conv("cls", &self.cls.weight, &self.cls.bias);
        out
    }

    /// Value buffers in the order of [`Params::layout`].
    pub fn buffers(&self) -> Vec<&Vec<f64>> {
        vec![
            &self.stem.weight.data,
            &self.stem.bias,
            &self.block2.weight.data,
            &self.block2.bias,
            &self.block3.weight.data,
            &self.block3.bias,
            &self.block4.weight.data,
            &self.block4.bias,
            &self.fuse3.reduce.data,
            &self.fuse3.reduce_bias,
            &self.fuse3.up.data,
            &self.fuse3.up_bias,
            &self.fuse2.reduce.data,
            &self.fuse2.reduce_bias,
            &self.fuse2.up.data,
            &self.fuse2.up_bias,
            &self.heat.weight.data,
            &self.heat.bias,
            &self.cons.weight.data,
            &self.cons.bias,
            &self.cls.weight.data,
            &self.cls.bias,
        ]
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Vec<f64>> {
        vec![
            &mut self.stem.weight.data,
            &mut self.stem.bias,
            &mut self.block2.weight.data,
            &mut self.block2.bias,
            &mut self.block3.weight.data,
            &mut self.block3.bias,
            &mut self.block4.weight.data,
            &mut self.block4.bias,
            &mut self.fuse3.reduce.data,
            &mut self.fuse3.reduce_bias,
            &mut self.fuse3.up.data,
            &mut self.fuse3.up_bias,
            &mut self.fuse2.reduce.data,
            &mut self.fuse2.reduce_bias,
            &mut self.fuse2.up.data,
            &mut self.fuse2.up_bias,
            &mut self.heat.weight.data,
            &mut self.heat.bias,
            &mut self.cons.weight.data,
            &mut self.cons.bias,
            &mut self.cls.weight.data,
            &mut self.cls.bias,
        ]
    }

    pub fn len(&self) -> usize {
        self.buffers().iter().map(|b| b.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `self += scale * other`, buffer by buffer.
    pub fn axpy(&mut self, scale: f64, other: &Params) {
        for (dst, src) in self.buffers_mut().into_iter().zip(other.buffers()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    /// Global L2 norm over every buffer.
    pub fn norm(&self) -> f64 {
        self.buffers()
            .iter()
            .flat_map(|b| b.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.buffers().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

/// Backbone levels and fused maps of one forward pass.
#[derive(Clone, Debug)]
pub struct FeaturePyramid {
    /// `F2, F3, F4`, each half the side of the previous.
    pub levels: Vec<FeatureMap>,
    /// `F'2, F'3`.
    pub fused: Vec<FeatureMap>,
    /// Upsampled contexts `E2, E3`.
    pub contexts: Vec<FeatureMap>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelOutput {
    pub logit: f64,
    /// Heatmap probabilities, strictly inside (0, 1).
    pub heatmap: Plane,
    /// Consistency probabilities, strictly inside (0, 1).
    pub consistency: Plane,
}

impl ModelOutput {
    pub fn score(&self) -> f64 {
        sigmoid(self.logit)
    }
}

/// Everything the backward pass needs.
struct Trace {
    input: FeatureMap,
    pre: [FeatureMap; LEVELS],
    act: [FeatureMap; LEVELS],
    fuse3: FusionTrace,
    fused3: FeatureMap,
    fuse2: FusionTrace,
    fused2: FeatureMap,
    heat_p: Vec<f64>,
    cons_p: Vec<f64>,
    pooled: Vec<f64>,
}

fn activate(z: &FeatureMap) -> FeatureMap {
    FeatureMap {
        data: z.data.iter().map(|&v| silu(v)).collect(),
        ..z.clone()
    }
}

fn head_probs(fused: &FeatureMap, layer: &Layer) -> Result<Vec<f64>> {
    let z = conv2d(fused, &layer.weight, &layer.bias, 1, 0)?;
    Ok(z.data
        .iter()
        .map(|&v| sigmoid(v).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP))
        .collect())
}

fn check_input(config: &ModelConfig, x: &FeatureMap) -> Result<()> {
    if x.channels != config.in_channels {
        return Err(Error::Dimension(format!(
            "model expects {} input channels, got {}",
            config.in_channels, x.channels
        )));
    }
    if x.height != x.width || x.height == 0 || !x.height.is_multiple_of(INPUT_MULTIPLE) {
        return Err(Error::Dimension(format!(
            "input must be square with side divisible by {INPUT_MULTIPLE}, got {}x{}",
            x.height, x.width
        )));
    }
    Ok(())
}

fn run(config: &ModelConfig, params: &Params, input: FeatureMap) -> Result<Trace> {
    check_input(config, &input)?;
    let blocks = [&params.stem, &params.block2, &params.block3, &params.block4];
    let mut pre: Vec<FeatureMap> = Vec::with_capacity(LEVELS);
    let mut act: Vec<FeatureMap> = Vec::with_capacity(LEVELS);
    for (k, layer) in blocks.iter().enumerate() {
        let x = if k == 0 { &input } else { &act[k - 1] };
        let z = conv2d(x, &layer.weight, &layer.bias, 2, 1)?;
        act.push(activate(&z));
        pre.push(z);
    }
    let e = &config.efpn;
    let fuse3 = upsample_context(&act[3], e, &params.fuse3)?;
    let fused3 = weighted_concat(&act[2], &fuse3.context, e.gamma_w)?;
    let fuse2 = upsample_context(&fused3, e, &params.fuse2)?;
    let fused2 = weighted_concat(&act[1], &fuse2.context, e.gamma_w)?;

    let heat_p = head_probs(&fused2, &params.heat)?;
    let cons_p = head_probs(&fused2, &params.cons)?;
    let pooled: Vec<f64> = (0..fused2.channels)
        .map(|c| fused2.channel_slice(c).iter().sum::<f64>() / (fused2.height * fused2.width) as f64)
        .collect();

    let pre: [FeatureMap; LEVELS] = pre.try_into().expect("four levels");
    let act: [FeatureMap; LEVELS] = act.try_into().expect("four levels");
    Ok(Trace {
        input,
        pre,
        act,
        fuse3,
        fused3,
        fuse2,
        fused2,
        heat_p,
        cons_p,
        pooled,
    })
}

impl Trace {
    fn logit(&self, params: &Params) -> f64 {
        self.pooled
            .iter()
            .zip(&params.cls.weight.data)
            .map(|(p, w)| p * w)
            .sum::<f64>()
            + params.cls.bias[0]
    }

    fn output(&self, params: &Params) -> ModelOutput {
        let (h, w) = (self.fused2.height, self.fused2.width);
        ModelOutput {
            logit: self.logit(params),
            heatmap: Plane::new(h, w, self.heat_p.clone()).expect("head size"),
            consistency: Plane::new(h, w, self.cons_p.clone()).expect("head size"),
        }
    }

    fn pyramid(&self) -> FeaturePyramid {
        FeaturePyramid {
            levels: self.act[1..].to_vec(),
            fused: vec![self.fused2.clone(), self.fused3.clone()],
            contexts: vec![self.fuse2.context.clone(), self.fuse3.context.clone()],
        }
    }
}

/// Runs the model on a feature map (already centred input).
pub fn forward_map(config: &ModelConfig, params: &Params, input: FeatureMap) -> Result<(ModelOutput, FeaturePyramid)> {
    let trace = run(config, params, input)?;
    Ok((trace.output(params), trace.pyramid()))
}

/// Runs the model on an image whose side is a multiple of [`INPUT_MULTIPLE`].
pub fn forward(config: &ModelConfig, params: &Params, image: &Image) -> Result<(ModelOutput, FeaturePyramid)> {
    forward_map(config, params, FeatureMap::from_image(image))
}

/// Supervision at head resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct Targets {
    pub heatmap: Plane,
    pub consistency: Plane,
    pub label: u8,
}

/// Loss terms, total loss, parameter gradients and input gradient for one sample.
pub struct LossEval {
    pub parts: LossParts,
    pub total: f64,
    pub grads: Params,
    pub input_grad: FeatureMap,
    pub output: ModelOutput,
}

/// Loss only, without the backward pass.
pub fn loss_map(
    config: &ModelConfig,
    params: &Params,
    input: FeatureMap,
    targets: &Targets,
    weights: &LossWeights,
) -> Result<(LossParts, f64)> {
    let trace = run(config, params, input)?;
    let out = trace.output(params);
    let parts = sample_parts(&out, targets, weights)?;
    Ok((parts, total_loss(&parts, weights)))
}

fn sample_parts(out: &ModelOutput, targets: &Targets, weights: &LossWeights) -> Result<LossParts> {
    let finite = |p: &Plane| p.data().iter().all(|v| v.is_finite());
    if !out.logit.is_finite() || !finite(&out.heatmap) || !finite(&out.consistency) {
        return Err(Error::Numeric("model output is not finite".into()));
    }
    Ok(LossParts {
        bce: classification_loss(out.logit, targets.label, weights.smoothing_eps),
        heatmap: focal_heatmap_loss(&out.heatmap, &targets.heatmap, weights.gamma)?,
        consistency: consistency_loss(&out.consistency, &targets.consistency)?,
    })
}

/// Chain rule through a clamped sigmoid head: zero where the clamp is active.
fn through_sigmoid(grad_p: &Plane, probs: &[f64]) -> Vec<f64> {
    grad_p
        .data()
        .iter()
        .zip(probs)
        .map(|(&g, &p)| {
            if p <= PROB_CLAMP || p >= 1.0 - PROB_CLAMP {
                0.0
            } else {
                g * p * (1.0 - p)
            }
        })
        .collect()
}

fn fusion_backward(
    e: &EfpnConfig,
    weights: &FusionWeights,
    trace: &FusionTrace,
    coarse_input: &FeatureMap,
    grad_context: &FeatureMap,
    grads: &mut FusionWeights,
) -> Result<FeatureMap> {
    let up_pad = e.up_padding();
    let red_pad = e.reduce_padding();
    let grad_reduced = correlate(grad_context, &weights.up, 2, up_pad)?;
    grads.up = kernel_grad(grad_context, &trace.reduced, e.up_kernel, 2, up_pad);
    grads.up_bias = channel_sums(grad_context);
    grads.reduce = kernel_grad(coarse_input, &grad_reduced, e.reduce_kernel, 1, red_pad);
    grads.reduce_bias = channel_sums(&grad_reduced);
    scatter(
        &grad_reduced,
        &weights.reduce,
        1,
        red_pad,
        coarse_input.height,
        coarse_input.width,
    )
}

/// Forward and backward pass for one sample under the weighted total loss.
pub fn loss_and_grad_map(
    config: &ModelConfig,
    params: &Params,
    input: FeatureMap,
    targets: &Targets,
    weights: &LossWeights,
) -> Result<LossEval> {
    let t = run(config, params, input)?;
    let out = t.output(params);
    if out.heatmap.dims() != targets.heatmap.dims() || out.consistency.dims() != targets.consistency.dims() {
        return Err(Error::Dimension(format!(
            "targets {:?} do not match head resolution {:?}",
            targets.heatmap.dims(),
            out.heatmap.dims()
        )));
    }
    let parts = sample_parts(&out, targets, weights)?;
    let total = total_loss(&parts, weights);
    let mut g = Params::zeros(config);
    let e = &config.efpn;

    // heads
    let d_logit = classification_grad(out.logit, targets.label, weights.smoothing_eps);
    let g_heat_p = focal_heatmap_grad(&out.heatmap, &targets.heatmap, weights.gamma)?;
    let g_cons_p = consistency_grad(&out.consistency, &targets.consistency)?;
    let dz_heat: Vec<f64> = through_sigmoid(&g_heat_p, &t.heat_p)
        .iter()
        .map(|v| v * weights.lambda1)
        .collect();
    let dz_cons: Vec<f64> = through_sigmoid(&g_cons_p, &t.cons_p)
        .iter()
        .map(|v| v * weights.lambda2)
        .collect();
    let (hh, hw) = (t.fused2.height, t.fused2.width);
    let dz_heat = FeatureMap::new(1, hh, hw, dz_heat)?;
    let dz_cons = FeatureMap::new(1, hh, hw, dz_cons)?;

    g.heat.weight = kernel_grad(&t.fused2, &dz_heat, 1, 1, 0);
    g.heat.bias = channel_sums(&dz_heat);
    g.cons.weight = kernel_grad(&t.fused2, &dz_cons, 1, 1, 0);
    g.cons.bias = channel_sums(&dz_cons);
    g.cls.weight.data = t.pooled.iter().map(|p| d_logit * p).collect();
    g.cls.bias = vec![d_logit];

    let mut d_fused2 = scatter(&dz_heat, &params.heat.weight, 1, 0, hh, hw)?;
    d_fused2.add_assign(&scatter(&dz_cons, &params.cons.weight, 1, 0, hh, hw)?);
    let area = (hh * hw) as f64;
    for c in 0..d_fused2.channels {
        let share = d_logit * params.cls.weight.data[c] / area;
        for v in &mut d_fused2.data[c * hh * hw..(c + 1) * hh * hw] {
            *v += share;
        }
    }

    // top-down fusion, finest first
    let (mut d_act2, d_ctx2) = weighted_concat_backward(&t.act[1], &t.fuse2.context, e.gamma_w, &d_fused2)?;
    let d_fused3 = fusion_backward(e, &params.fuse2, &t.fuse2, &t.fused3, &d_ctx2, &mut g.fuse2)?;
    let (mut d_act3, d_ctx3) = weighted_concat_backward(&t.act[2], &t.fuse3.context, e.gamma_w, &d_fused3)?;
    let mut d_act4 = fusion_backward(e, &params.fuse3, &t.fuse3, &t.act[3], &d_ctx3, &mut g.fuse3)?;

    // backbone, deepest first
    let layers = [&params.stem, &params.block2, &params.block3, &params.block4];
    let mut d_next: Option<FeatureMap> = None;
    let mut input_grad = FeatureMap::zeros(t.input.channels, t.input.height, t.input.width);
    for k in (0..LEVELS).rev() {
        let mut d_act = match k {
            3 => std::mem::replace(&mut d_act4, FeatureMap::zeros(0, 0, 0)),
            2 => std::mem::replace(&mut d_act3, FeatureMap::zeros(0, 0, 0)),
            1 => std::mem::replace(&mut d_act2, FeatureMap::zeros(0, 0, 0)),
            _ => FeatureMap::zeros(t.act[0].channels, t.act[0].height, t.act[0].width),
        };
        if let Some(d) = d_next.take() {
            d_act.add_assign(&d);
        }
        let z = &t.pre[k];
        let dz = FeatureMap {
            data: d_act
                .data
                .iter()
                .zip(&z.data)
                .map(|(g, &zv)| g * silu_grad(zv))
                .collect(),
            ..z.clone()
        };
        let x = if k == 0 { &t.input } else { &t.act[k - 1] };
        let grad_layer = Layer {
            weight: kernel_grad(x, &dz, 3, 2, 1),
            bias: channel_sums(&dz),
        };
        match k {
            0 => g.stem = grad_layer,
            1 => g.block2 = grad_layer,
            2 => g.block3 = grad_layer,
            _ => g.block4 = grad_layer,
        }
        let dx = scatter(&dz, &layers[k].weight, 2, 1, x.height, x.width)?;
        if k == 0 {
            input_grad = dx;
        } else {
            d_next = Some(dx);
        }
    }

    Ok(LossEval {
        parts,
        total,
        grads: g,
        input_grad,
        output: out,
    })
}

pub fn loss_and_grad(
    config: &ModelConfig,
    params: &Params,
    image: &Image,
    targets: &Targets,
    weights: &LossWeights,
) -> Result<LossEval> {
    loss_and_grad_map(config, params, FeatureMap::from_image(image), targets, weights)
}
