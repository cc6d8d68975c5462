use serde::{Deserialize, Serialize};

use super::filter::{binomial_kernel, convolve_separable, gaussian_blur, sample_bilinear, Edge};
use super::{Plane, SoftMask};
use crate::rng::SeedStream;

/// Mask deformation applied as affine jitter, then a smooth elastic warp, then
/// blurring. Zero in every field is the identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeformParams {
    /// Relative magnitude of the random affine: scale in `1 ± a`, rotation in
    /// `± a` radians, translation in `± a` of the mask size.
    pub affine: f64,
    /// Peak elastic displacement in pixels.
    pub elastic_alpha: f64,
    /// Smoothing width of the elastic displacement field in pixels.
    pub elastic_sigma: f64,
    /// Binomial blur radius in pixels (kernel has `2r + 1` taps).
    pub blur_radius: usize,
}

impl DeformParams {
    pub fn identity() -> Self {
        Self {
            affine: 0.0,
            elastic_alpha: 0.0,
            elastic_sigma: 0.0,
            blur_radius: 0,
        }
    }
}

impl Default for DeformParams {
    fn default() -> Self {
        Self {
            affine: 0.03,
            elastic_alpha: 1.5,
            elastic_sigma: 4.0,
            blur_radius: 4,
        }
    }
}

/// Randomly deforms a mask. Output stays in `[0, 1]`; a positive blur
/// radius turns hard edges into a graded band.
pub fn deform_mask(mask: &SoftMask, params: &DeformParams, rng: &mut SeedStream) -> SoftMask {
    let mut plane = mask.plane().clone();
    let (h, w) = plane.dims();

    if params.affine > 0.0 {
        let a = params.affine;
        let scale = 1.0 + rng.range(-a, a);
        let theta = rng.range(-a, a);
        let ty = rng.range(-a, a) * h as f64;
        let tx = rng.range(-a, a) * w as f64;
        let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
        let (sin, cos) = theta.sin_cos();
        let src = plane.clone();
        // inverse map: output pixel -> source position
        plane = Plane::from_fn(h, w, |i, j| {
            let dy = i as f64 - cy - ty;
            let dx = j as f64 - cx - tx;
            let sy = (cos * dy - sin * dx) / scale + cy;
            let sx = (sin * dy + cos * dx) / scale + cx;
            sample_bilinear(&src, sy, sx, Edge::Zero)
        });
    }

    if params.elastic_alpha > 0.0 {
        let noise = |rng: &mut SeedStream| {
            let raw = Plane::from_fn(h, w, |_, _| rng.range(-1.0, 1.0));
            let smooth = gaussian_blur(&raw, params.elastic_sigma.max(0.5));
            let peak = smooth.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if peak > 0.0 {
                smooth.map(|v| v / peak * params.elastic_alpha)
            } else {
                smooth
            }
        };
        let dy = noise(rng);
        let dx = noise(rng);
        let src = plane.clone();
        plane = Plane::from_fn(h, w, |i, j| {
            sample_bilinear(&src, i as f64 + dy.get(i, j), j as f64 + dx.get(i, j), Edge::Zero)
        });
    }

    if params.blur_radius > 0 {
        plane = convolve_separable(&plane, &binomial_kernel(params.blur_radius));
    }

    SoftMask::from_plane_unchecked(plane.map(|v| v.clamp(0.0, 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{convex_hull_mask, Point};

    fn square_mask() -> SoftMask {
        let pts = [
            Point::new(8.0, 8.0),
            Point::new(24.0, 8.0),
            Point::new(24.0, 24.0),
            Point::new(8.0, 24.0),
        ];
        convex_hull_mask(&pts, 32, 32).unwrap()
    }

    #[test]
    fn identity_params() {
        let m = square_mask();
        let out = deform_mask(&m, &DeformParams::identity(), &mut SeedStream::new(1));
        assert_eq!(out, m);
    }

    #[test]
    fn blur_creates_soft_band() {
        let m = square_mask();
        let p = DeformParams {
            blur_radius: 2,
            ..DeformParams::identity()
        };
        let out = deform_mask(&m, &p, &mut SeedStream::new(1));
        assert!(out.data().iter().any(|&v| v > 0.0 && v < 1.0));
        // interior stays exactly one
        assert_eq!(out.get(16, 16), 1.0);
    }

    #[test]
    fn deterministic_for_seed() {
        let m = square_mask();
        let p = DeformParams::default();
        let a = deform_mask(&m, &p, &mut SeedStream::new(99));
        let b = deform_mask(&m, &p, &mut SeedStream::new(99));
        assert_eq!(a, b);
        let c = deform_mask(&m, &p, &mut SeedStream::new(100));
        assert_ne!(a, c);
    }

    #[test]
    fn range_preserved_under_strong_params() {
        let m = square_mask();
        let p = DeformParams {
            affine: 0.5,
            elastic_alpha: 10.0,
            elastic_sigma: 1.0,
            blur_radius: 6,
        };
        for seed in 0..10 {
            let out = deform_mask(&m, &p, &mut SeedStream::new(seed));
            assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
