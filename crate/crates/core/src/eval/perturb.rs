//! Deterministic image corruptions at five severity levels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::imaging::filter::gaussian_blur_image;
use crate::imaging::Image;
use crate::rng::SeedStream;
use crate::{Error, Result};

pub const MAX_SEVERITY: u8 = 5;

/// Saturation multiplier per severity.
pub const SATURATION_FACTORS: [f64; 5] = [0.4, 0.3, 0.2, 0.1, 0.0];
/// Contrast multiplier per severity.
pub const CONTRAST_FACTORS: [f64; 5] = [0.85, 0.725, 0.6, 0.475, 0.35];
/// Number of occluding blocks per severity.
pub const BLOCK_COUNTS: [usize; 5] = [16, 32, 48, 64, 80];
/// Block side as a fraction of the shorter image side.
pub const BLOCK_FRACTION: f64 = 1.0 / 16.0;
/// Gaussian noise variance per severity.
pub const NOISE_VARIANCES: [f64; 5] = [0.001, 0.002, 0.005, 0.01, 0.05];
/// Gaussian blur sigma (pixels) per severity.
pub const BLUR_SIGMAS: [f64; 5] = [1.0, 1.5, 2.0, 3.0, 4.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbKind {
    Saturation,
    Contrast,
    Block,
    Noise,
    Blur,
    Pixelation,
}

impl PerturbKind {
    pub const ALL: [PerturbKind; 6] = [
        PerturbKind::Saturation,
        PerturbKind::Contrast,
        PerturbKind::Block,
        PerturbKind::Noise,
        PerturbKind::Blur,
        PerturbKind::Pixelation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PerturbKind::Saturation => "saturation",
            PerturbKind::Contrast => "contrast",
            PerturbKind::Block => "block",
            PerturbKind::Noise => "noise",
            PerturbKind::Blur => "blur",
            PerturbKind::Pixelation => "pixelation",
        }
    }
}

impl fmt::Display for PerturbKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PerturbKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PerturbKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown perturbation {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub kind: PerturbKind,
    /// 0 is the identity, 1..=5 the graded levels.
    pub severity: u8,
}

impl PerturbationSpec {
    pub fn new(kind: PerturbKind, severity: u8) -> Result<Self> {
        if severity > MAX_SEVERITY {
            return Err(Error::Config(format!("severity {severity} exceeds {MAX_SEVERITY}")));
        }
        Ok(Self { kind, severity })
    }
}

/// Applies `spec` to `image`; `seed` drives the random kinds.
pub fn perturb(image: &Image, spec: PerturbationSpec, seed: u64) -> Result<Image> {
    let s = spec.severity as usize;
    if s == 0 {
        return Ok(image.clone());
    }
    if s > MAX_SEVERITY as usize {
        return Err(Error::Config(format!("severity {s} exceeds {MAX_SEVERITY}")));
    }
    let level = s - 1;
    let mut rng = SeedStream::new(seed).fork(spec.kind.name());
    Ok(match spec.kind {
        PerturbKind::Saturation => {
            let f = SATURATION_FACTORS[level];
            let luma = image.luma();
            Image::from_fn(image.height(), image.width(), image.channels(), |i, j, c| {
                let y = luma.get(i, j);
                y + f * (image.get(i, j, c) - y)
            })
        }
        PerturbKind::Contrast => {
            let f = CONTRAST_FACTORS[level];
            let mean = image.luma().mean();
            image.map(|v| mean + f * (v - mean))
        }
        PerturbKind::Block => {
            let (h, w) = (image.height(), image.width());
            let side = ((h.min(w) as f64 * BLOCK_FRACTION).round() as usize).max(1);
            let mut data = image.data().to_vec();
            let ch = image.channels();
            for _ in 0..BLOCK_COUNTS[level] {
                let top = rng.below(h + 1 - side.min(h));
                let left = rng.below(w + 1 - side.min(w));
                let gray = rng.uniform();
                for i in top..(top + side).min(h) {
                    for j in left..(left + side).min(w) {
                        for c in 0..ch {
                            data[(i * w + j) * ch + c] = gray;
                        }
                    }
                }
            }
            Image::new(h, w, ch, data)?
        }
        PerturbKind::Noise => {
            let sigma = NOISE_VARIANCES[level].sqrt();
            image.map(|v| v + sigma * rng.normal())
        }
        PerturbKind::Blur => gaussian_blur_image(image, BLUR_SIGMAS[level]),
        PerturbKind::Pixelation => pixelate(image, 1 << s),
    })
}

/// Replaces every `block x block` tile (edge tiles may be smaller) by its mean.
pub fn pixelate(image: &Image, block: usize) -> Image {
    let (h, w, ch) = (image.height(), image.width(), image.channels());
    let mut means = vec![0.0; h.div_ceil(block) * w.div_ceil(block) * ch];
    let bw = w.div_ceil(block);
    for bi in 0..h.div_ceil(block) {
        for bj in 0..bw {
            let rows = bi * block..((bi + 1) * block).min(h);
            let cols = bj * block..((bj + 1) * block).min(w);
            let n = (rows.len() * cols.len()) as f64;
            for c in 0..ch {
                let mut sum = 0.0;
                for i in rows.clone() {
                    for j in cols.clone() {
                        sum += image.get(i, j, c);
                    }
                }
                means[(bi * bw + bj) * ch + c] = sum / n;
            }
        }
    }
    Image::from_fn(h, w, ch, |i, j, c| means[((i / block) * bw + j / block) * ch + c])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(seed: u64) -> Image {
        let mut s = SeedStream::new(seed);
        Image::from_fn(37, 45, 3, |_, _, _| s.uniform())
    }

    #[test]
    fn severity_zero_is_identity() {
        let a = img(1);
        for kind in PerturbKind::ALL {
            assert_eq!(perturb(&a, PerturbationSpec::new(kind, 0).unwrap(), 3).unwrap(), a);
        }
    }

    #[test]
    fn range_and_shape() {
        let a = img(2);
        for kind in PerturbKind::ALL {
            for s in 1..=MAX_SEVERITY {
                let out = perturb(&a, PerturbationSpec::new(kind, s).unwrap(), 7).unwrap();
                assert!(out.same_dims(&a));
                assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)), "{kind} {s}");
            }
        }
    }

    #[test]
    fn pixelation_is_blockwise_constant() {
        let a = img(3);
        for s in 1..=MAX_SEVERITY {
            let out = perturb(&a, PerturbationSpec::new(PerturbKind::Pixelation, s).unwrap(), 0).unwrap();
            let b = 1usize << s;
            for i in 0..a.height() {
                for j in 0..a.width() {
                    for c in 0..3 {
                        let anchor = out.get(i / b * b, j / b * b, c);
                        assert_eq!(out.get(i, j, c), anchor);
                    }
                }
            }
        }
    }

    #[test]
    fn random_kinds_reproducible() {
        let a = img(4);
        for kind in [PerturbKind::Noise, PerturbKind::Block] {
            let spec = PerturbationSpec::new(kind, 3).unwrap();
            assert_eq!(perturb(&a, spec, 9).unwrap(), perturb(&a, spec, 9).unwrap());
            assert_ne!(perturb(&a, spec, 9).unwrap(), perturb(&a, spec, 10).unwrap());
        }
    }

    #[test]
    fn saturation_zero_is_gray() {
        let a = img(5);
        let out = perturb(&a, PerturbationSpec::new(PerturbKind::Saturation, 5).unwrap(), 0).unwrap();
        for i in 0..a.height() {
            for j in 0..a.width() {
                assert_eq!(out.get(i, j, 0), out.get(i, j, 1));
                assert_eq!(out.get(i, j, 1), out.get(i, j, 2));
            }
        }
    }

    #[test]
    fn parse_kinds() {
        assert_eq!("blur".parse::<PerturbKind>().unwrap(), PerturbKind::Blur);
        assert!("sharpen".parse::<PerturbKind>().is_err());
        assert!(PerturbationSpec::new(PerturbKind::Noise, 6).is_err());
    }
}
