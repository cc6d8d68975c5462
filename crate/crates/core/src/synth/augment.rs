use jpeg_encoder::{ColorType, Encoder, SamplingFactor};
use serde::{Deserialize, Serialize};

use crate::imaging::filter::{gaussian_blur_image, resize_image, sample_bilinear, Edge};
use crate::imaging::{Image, Plane};
use crate::rng::SeedStream;

/// Image-level training augmentations. `None` disables a transform.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    /// Probability of a horizontal flip.
    pub hflip: Option<f64>,
    /// Random crop keeping at least `1 - crop` of each side, resized back.
    pub crop: Option<f64>,
    /// Zoom factor range `[lo, hi]` about the centre.
    pub scale: Option<(f64, f64)>,
    /// `(probability, max_area_fraction)` of erasing a random rectangle.
    pub erasing: Option<(f64, f64)>,
    /// Brightness / contrast / per-channel shift magnitude.
    pub color_jitter: Option<f64>,
    /// Maximum standard deviation of additive Gaussian noise.
    pub noise: Option<f64>,
    /// Maximum Gaussian blur sigma in pixels.
    pub blur: Option<f64>,
    /// JPEG quality range `[lo, hi]`.
    pub jpeg: Option<(u8, u8)>,
}

impl AugmentConfig {
    pub fn none() -> Self {
        Self::default()
    }

    /// Every transform on, with moderate magnitudes.
    pub fn all() -> Self {
        Self {
            hflip: Some(0.5),
            crop: Some(0.1),
            scale: Some((0.9, 1.1)),
            erasing: Some((0.25, 0.1)),
            color_jitter: Some(0.1),
            noise: Some(0.02),
            blur: Some(1.0),
            jpeg: Some((60, 100)),
        }
    }
}

/// Adobe APP14 payload declaring "no colour transform": the three
/// components are stored as R, G, B.
const ADOBE_RGB: &[u8] = b"Adobe\x00\x64\x00\x00\x00\x00\x00";

/// JPEG-encodes at `quality` and decodes again. Colour images are coded as
/// RGB components at full resolution.
pub fn jpeg_round_trip(image: &Image, quality: u8) -> Image {
    let mut buf = Vec::new();
    let mut encoder = Encoder::new(&mut buf, quality.clamp(1, 100));
    encoder.set_sampling_factor(SamplingFactor::R_4_4_4);
    let color = match image.channels() {
        1 => ColorType::Luma,
        3 => {
            encoder
                .add_app_segment(14, ADOBE_RGB.to_vec())
                .expect("valid APP14 segment");
            // Handed over as already-transformed components so no RGB to
            // YCbCr conversion takes place.
            ColorType::Ycbcr
        }
        n => panic!("JPEG needs 1 or 3 channels, got {n}"),
    };
    encoder
        .encode(&image.to_u8(), image.width() as u16, image.height() as u16, color)
        .expect("in-memory JPEG encode");
    let decoded = image::load_from_memory_with_format(&buf, image::ImageFormat::Jpeg).expect("decode own JPEG");
    let decoded = if image.channels() == 1 {
        image::DynamicImage::ImageLuma8(decoded.to_luma8())
    } else {
        decoded
    };
    Image::from_dynamic(decoded)
}

/// Applies the enabled transforms in a fixed order: flip, crop, scale,
/// colour jitter, noise, blur, JPEG, erasing. Output keeps the input size.
pub fn augment(image: &Image, config: &AugmentConfig, seed: u64) -> Image {
    let rng = SeedStream::new(seed);
    let (h, w, ch) = (image.height(), image.width(), image.channels());
    let mut out = image.clone();

    if let Some(p) = config.hflip {
        if rng.fork("hflip").bernoulli(p) {
            out = out.hflip();
        }
    }
    if let Some(frac) = config.crop {
        let mut r = rng.fork("crop");
        let ch_ = ((h as f64 * (1.0 - frac * r.uniform())).round() as usize).clamp(1, h);
        let cw = ((w as f64 * (1.0 - frac * r.uniform())).round() as usize).clamp(1, w);
        let y0 = r.below(h - ch_ + 1);
        let x0 = r.below(w - cw + 1);
        let cropped = Image::from_fn(ch_, cw, ch, |i, j, c| out.get(y0 + i, x0 + j, c));
        out = resize_image(&cropped, h, w);
    }
    if let Some((lo, hi)) = config.scale {
        let zoom = rng.fork("scale").range(lo, hi);
        if zoom != 1.0 {
            let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
            let planes: Vec<Plane> = (0..ch)
                .map(|c| {
                    let src = out.channel(c);
                    Plane::from_fn(h, w, |i, j| {
                        sample_bilinear(
                            &src,
                            (i as f64 - cy) / zoom + cy,
                            (j as f64 - cx) / zoom + cx,
                            Edge::Clamp,
                        )
                    })
                })
                .collect();
            out = Image::from_planes(&planes).expect("same dims");
        }
    }
    if let Some(mag) = config.color_jitter {
        let mut r = rng.fork("color");
        let brightness = r.range(-mag, mag);
        let contrast = 1.0 + r.range(-mag, mag);
        let shifts: Vec<f64> = (0..ch).map(|_| r.range(-mag, mag) / 2.0).collect();
        let mean = out.data().iter().sum::<f64>() / out.data().len() as f64;
        let src = out.clone();
        out = Image::from_fn(h, w, ch, |i, j, c| {
            (src.get(i, j, c) - mean) * contrast + mean + brightness + shifts[c]
        });
    }
    if let Some(max_sigma) = config.noise {
        let mut r = rng.fork("noise");
        let sigma = r.range(0.0, max_sigma);
        out = out.map(|v| v + sigma * r.normal());
    }
    if let Some(max_sigma) = config.blur {
        let sigma = rng.fork("blur").range(0.0, max_sigma);
        out = gaussian_blur_image(&out, sigma);
    }
    if let Some((lo, hi)) = config.jpeg {
        let q = lo + rng.fork("jpeg").below((hi.max(lo) - lo) as usize + 1) as u8;
        out = jpeg_round_trip(&out, q);
    }
    if let Some((p, max_area)) = config.erasing {
        let mut r = rng.fork("erasing");
        if r.bernoulli(p) {
            let area = r.range(0.02, max_area.max(0.02)) * (h * w) as f64;
            let aspect = r.range(0.5, 2.0);
            let eh = ((area * aspect).sqrt().round() as usize).clamp(1, h);
            let ew = ((area / aspect).sqrt().round() as usize).clamp(1, w);
            let y0 = r.below(h - eh + 1);
            let x0 = r.below(w - ew + 1);
            let fill: Vec<f64> = (0..ch).map(|_| r.uniform()).collect();
            let src = out.clone();
            out = Image::from_fn(h, w, ch, |i, j, c| {
                if (y0..y0 + eh).contains(&i) && (x0..x0 + ew).contains(&j) {
                    fill[c]
                } else {
                    src.get(i, j, c)
                }
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_image(seed: u64, h: usize, w: usize) -> Image {
        let mut s = SeedStream::new(seed);
        Image::from_fn(h, w, 3, |_, _, _| s.uniform())
    }

    #[test]
    fn disabled_is_identity() {
        let img = random_image(1, 16, 16);
        assert_eq!(augment(&img, &AugmentConfig::none(), 5), img);
    }

    #[test]
    fn double_flip_is_identity() {
        let img = random_image(2, 9, 13);
        let cfg = AugmentConfig {
            hflip: Some(1.0),
            ..AugmentConfig::none()
        };
        let once = augment(&img, &cfg, 4);
        assert_ne!(once, img);
        assert_eq!(augment(&once, &cfg, 4), img);
    }

    #[test]
    fn everything_on_keeps_dims_and_range() {
        for seed in 0..20 {
            let img = random_image(seed, 24, 20);
            let out = augment(&img, &AugmentConfig::all(), seed);
            assert!(out.same_dims(&img));
            assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
            assert_eq!(out, augment(&img, &AugmentConfig::all(), seed));
        }
    }
}
