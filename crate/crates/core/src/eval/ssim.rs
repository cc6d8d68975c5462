//! Windowed SSIM and its head-region restriction.

use crate::imaging::filter::gaussian_kernel;
use crate::imaging::{convex_hull, convex_hull_mask, Image, LandmarkSet, Plane, Point, SoftMask};
use crate::{Error, Result};

pub const WINDOW: usize = 11;
pub const WINDOW_SIGMA: f64 = 1.5;
pub const K1: f64 = 0.01;
pub const K2: f64 = 0.03;
pub const DYNAMIC_RANGE: f64 = 1.0;
/// Relative growth of the landmark hull that defines the head region.
pub const HEAD_DILATION: f64 = 0.1;

/// Separable filtering that keeps only fully supported windows.
fn filter_valid(plane: &Plane, kernel: &[f64]) -> Plane {
    let (h, w) = plane.dims();
    let k = kernel.len();
    let (oh, ow) = (h + 1 - k, w + 1 - k);
    let rows = Plane::from_fn(h, ow, |i, j| (0..k).map(|t| kernel[t] * plane.get(i, j + t)).sum());
    Plane::from_fn(oh, ow, |i, j| (0..k).map(|t| kernel[t] * rows.get(i + t, j)).sum())
}

/// SSIM at every fully supported window, averaged over channels. Entry
/// `(i, j)` belongs to the window centred at pixel `(i + 5, j + 5)`.
pub fn ssim_map(a: &Image, b: &Image) -> Result<Plane> {
    if !a.same_dims(b) {
        return Err(Error::Dimension(format!(
            "SSIM inputs differ: {}x{}x{} vs {}x{}x{}",
            a.height(),
            a.width(),
            a.channels(),
            b.height(),
            b.width(),
            b.channels()
        )));
    }
    if a.height() < WINDOW || a.width() < WINDOW {
        return Err(Error::Dimension(format!(
            "SSIM needs at least {WINDOW}x{WINDOW} pixels"
        )));
    }
    let kernel = gaussian_kernel(WINDOW_SIGMA);
    debug_assert_eq!(kernel.len(), WINDOW);
    let c1 = (K1 * DYNAMIC_RANGE).powi(2);
    let c2 = (K2 * DYNAMIC_RANGE).powi(2);
    let (oh, ow) = (a.height() + 1 - WINDOW, a.width() + 1 - WINDOW);
    let mut acc = vec![0.0; oh * ow];
    for c in 0..a.channels() {
        let x = a.channel(c);
        let y = b.channel(c);
        let mu_x = filter_valid(&x, &kernel);
        let mu_y = filter_valid(&y, &kernel);
        let xx = filter_valid(&x.map(|v| v * v), &kernel);
        let yy = filter_valid(&y.map(|v| v * v), &kernel);
        let xy = filter_valid(
            &Plane::from_fn(x.height(), x.width(), |i, j| x.get(i, j) * y.get(i, j)),
            &kernel,
        );
        for (k, out) in acc.iter_mut().enumerate() {
            let (mx, my) = (mu_x.data()[k], mu_y.data()[k]);
            let vx = xx.data()[k] - mx * mx;
            let vy = yy.data()[k] - my * my;
            let cov = xy.data()[k] - mx * my;
            *out += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        }
    }
    let n = a.channels() as f64;
    Plane::new(oh, ow, acc.into_iter().map(|v| v / n).collect())
}

/// Mean SSIM over all fully supported windows.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    Ok(ssim_map(a, b)?.mean())
}

/// Mean SSIM over the windows whose centre lies inside the binary `head_mask`.
pub fn mask_ssim(fake: &Image, real: &Image, head_mask: &SoftMask) -> Result<f64> {
    if head_mask.dims() != (fake.height(), fake.width()) {
        return Err(Error::Dimension("head mask and image sizes differ".into()));
    }
    if let Some(v) = head_mask.data().iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::Domain(format!("head mask must be binary, found {v}")));
    }
    let map = ssim_map(fake, real)?;
    let half = WINDOW / 2;
    let mut sum = 0.0;
    let mut n = 0usize;
    for i in 0..map.height() {
        for j in 0..map.width() {
            if head_mask.get(i + half, j + half) == 1.0 {
                sum += map.get(i, j);
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::UndefinedMetric("head mask covers no SSIM window centre".into()));
    }
    Ok(sum / n as f64)
}

/// Convex hull of the landmarks grown by `dilation` about its centroid.
pub fn head_mask(landmarks: &LandmarkSet, height: usize, width: usize, dilation: f64) -> Result<SoftMask> {
    let hull = convex_hull(landmarks.points())?;
    let n = hull.len() as f64;
    let cx = hull.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = hull.iter().map(|p| p.y).sum::<f64>() / n;
    let grown: Vec<Point> = hull
        .iter()
        .map(|p| Point::new(cx + (1.0 + dilation) * (p.x - cx), cy + (1.0 + dilation) * (p.y - cy)))
        .collect();
    convex_hull_mask(&grown, height, width)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;

    fn noise_image(seed: u64, n: usize) -> Image {
        let mut s = SeedStream::new(seed);
        Image::from_fn(n, n, 3, |_, _, _| s.uniform())
    }

    #[test]
    fn identical_is_one() {
        let a = noise_image(1, 24);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() <= 1e-9);
        let m = SoftMask::ones(24, 24);
        assert!((mask_ssim(&a, &a, &m).unwrap() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn negative_is_anticorrelated() {
        let a = noise_image(2, 20);
        let neg = a.map(|v| 1.0 - v);
        assert!(ssim(&a, &neg).unwrap() < 0.0);
    }

    #[test]
    fn errors() {
        let a = noise_image(3, 16);
        assert!(matches!(ssim(&a, &noise_image(3, 15)), Err(Error::Dimension(_))));
        assert!(matches!(
            ssim(&noise_image(1, 8), &noise_image(2, 8)),
            Err(Error::Dimension(_))
        ));
        let half = SoftMask::filled(16, 16, 0.5).unwrap();
        assert!(matches!(mask_ssim(&a, &a, &half), Err(Error::Domain(_))));
        assert!(matches!(
            mask_ssim(&a, &a, &SoftMask::zeros(16, 16)),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn mask_restricts_windows() {
        // damage only the left half; a mask over the right half must not see it
        let a = noise_image(4, 40);
        let b = Image::from_fn(
            40,
            40,
            3,
            |i, j, c| if j < 12 { 1.0 - a.get(i, j, c) } else { a.get(i, j, c) },
        );
        let right = SoftMask::from_values(
            40,
            40,
            (0..1600).map(|k| if k % 40 >= 20 { 1.0 } else { 0.0 }).collect(),
        )
        .unwrap();
        assert!((mask_ssim(&b, &a, &right).unwrap() - 1.0).abs() < 1e-9);
        assert!(ssim(&b, &a).unwrap() < 0.9);
    }

    #[test]
    fn head_mask_grows_hull() {
        let (_, lm) = crate::synth::synthetic_face(64, 5);
        let tight = head_mask(&lm, 64, 64, 0.0).unwrap();
        let wide = head_mask(&lm, 64, 64, HEAD_DILATION).unwrap();
        let count = |m: &SoftMask| m.data().iter().filter(|&&v| v == 1.0).count();
        assert!(count(&wide) > count(&tight));
        assert!(tight.data().iter().zip(wide.data()).all(|(t, w)| t <= w));
    }
}
