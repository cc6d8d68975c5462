//! Separable filtering, resampling and resizing on [`Plane`]s.

use super::{Image, Plane};
use crate::{Error, Result};

/// Normalized Gaussian taps covering `±ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

/// Binomial taps `C(2r, k) / 4^r`, a Gaussian approximation with variance
/// `r / 2`. The taps are dyadic rationals, so filtering a constant region
/// returns that constant exactly.
pub fn binomial_kernel(radius: usize) -> Vec<f64> {
    assert!(radius <= 26, "binomial radius {radius} loses exactness");
    let n = 2 * radius;
    let mut row = vec![1u64];
    for _ in 0..n {
        let mut next = vec![1u64; row.len() + 1];
        for k in 1..row.len() {
            next[k] = row[k - 1] + row[k];
        }
        row = next;
    }
    let denom = (1u64 << n) as f64;
    row.into_iter().map(|v| v as f64 / denom).collect()
}

/// Convolves rows then columns with a symmetric odd-length kernel,
/// replicating edge pixels.
pub fn convolve_separable(plane: &Plane, kernel: &[f64]) -> Plane {
    if kernel.len() == 1 {
        return plane.map(|v| v * kernel[0]);
    }
    let (h, w) = plane.dims();
    let r = (kernel.len() / 2) as isize;
    let horiz = Plane::from_fn(h, w, |i, j| {
        kernel
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let jj = (j as isize + k as isize - r).clamp(0, w as isize - 1) as usize;
                t * plane.get(i, jj)
            })
            .sum()
    });
    Plane::from_fn(h, w, |i, j| {
        kernel
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let ii = (i as isize + k as isize - r).clamp(0, h as isize - 1) as usize;
                t * horiz.get(ii, j)
            })
            .sum()
    })
}

pub fn gaussian_blur(plane: &Plane, sigma: f64) -> Plane {
    convolve_separable(plane, &gaussian_kernel(sigma))
}

pub fn gaussian_blur_image(image: &Image, sigma: f64) -> Image {
    if sigma <= 0.0 {
        return image.clone();
    }
    let planes: Vec<Plane> = (0..image.channels())
        .map(|c| gaussian_blur(&image.channel(c), sigma))
        .collect();
    Image::from_planes(&planes).expect("planes share dims")
}

/// Averages non-overlapping `factor x factor` blocks.
pub fn box_downsample(plane: &Plane, factor: usize) -> Result<Plane> {
    let (h, w) = plane.dims();
    if factor == 0 || h % factor != 0 || w % factor != 0 {
        return Err(Error::Dimension(format!(
            "{h}x{w} not divisible by downsampling factor {factor}"
        )));
    }
    let area = (factor * factor) as f64;
    Ok(Plane::from_fn(h / factor, w / factor, |i, j| {
        let mut acc = 0.0;
        for di in 0..factor {
            for dj in 0..factor {
                acc += plane.get(i * factor + di, j * factor + dj);
            }
        }
        acc / area
    }))
}

/// How samples outside the grid are treated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Edge {
    Zero,
    Clamp,
}

/// Bilinear sample at fractional `(y, x)`. Interpolation is written as
/// `a + t (b - a)` so constant neighborhoods are reproduced exactly.
pub fn sample_bilinear(plane: &Plane, y: f64, x: f64, edge: Edge) -> f64 {
    let (h, w) = (plane.height() as isize, plane.width() as isize);
    let fetch = |i: isize, j: isize| -> f64 {
        match edge {
            Edge::Clamp => plane.get(i.clamp(0, h - 1) as usize, j.clamp(0, w - 1) as usize),
            Edge::Zero => {
                if i < 0 || j < 0 || i >= h || j >= w {
                    0.0
                } else {
                    plane.get(i as usize, j as usize)
                }
            }
        }
    };
    let y0 = y.floor();
    let x0 = x.floor();
    let ty = y - y0;
    let tx = x - x0;
    let (i, j) = (y0 as isize, x0 as isize);
    let a = fetch(i, j);
    let b = fetch(i, j + 1);
    let c = fetch(i + 1, j);
    let d = fetch(i + 1, j + 1);
    let top = a + tx * (b - a);
    let bottom = c + tx * (d - c);
    top + ty * (bottom - top)
}

/// Resizes with pixel-center alignment and edge clamping.
pub fn resize_bilinear(plane: &Plane, height: usize, width: usize) -> Plane {
    if plane.dims() == (height, width) {
        return plane.clone();
    }
    let sy = plane.height() as f64 / height as f64;
    let sx = plane.width() as f64 / width as f64;
    Plane::from_fn(height, width, |i, j| {
        let y = (i as f64 + 0.5) * sy - 0.5;
        let x = (j as f64 + 0.5) * sx - 0.5;
        sample_bilinear(plane, y, x, Edge::Clamp)
    })
}

pub fn resize_image(image: &Image, height: usize, width: usize) -> Image {
    let planes: Vec<Plane> = (0..image.channels())
        .map(|c| resize_bilinear(&image.channel(c), height, width))
        .collect();
    Image::from_planes(&planes).expect("planes share dims")
}

/// Repeats every value into a `factor x factor` block.
pub fn nearest_upsample(plane: &Plane, factor: usize) -> Plane {
    Plane::from_fn(plane.height() * factor, plane.width() * factor, |i, j| {
        plane.get(i / factor, j / factor)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_sums_to_one_exactly() {
        for r in 0..12 {
            let k = binomial_kernel(r);
            assert_eq!(k.len(), 2 * r + 1);
            assert_eq!(k.iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn constant_survives_binomial_blur() {
        let p = Plane::filled(9, 9, 0.75);
        let out = convolve_separable(&p, &binomial_kernel(3));
        assert!(out.data().iter().all(|&v| v == 0.75));
    }

    #[test]
    fn gaussian_kernel_normalized() {
        let k = gaussian_kernel(1.7);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert_eq!(k.len(), 2 * 6 + 1);
    }

    #[test]
    fn downsample_averages_blocks() {
        let p = Plane::from_fn(4, 4, |i, j| (i * 4 + j) as f64);
        let d = box_downsample(&p, 2).unwrap();
        assert_eq!(d.data(), &[2.5, 4.5, 10.5, 12.5]);
        assert!(box_downsample(&p, 3).is_err());
    }

    #[test]
    fn bilinear_on_grid_points() {
        let p = Plane::from_fn(3, 3, |i, j| (i * 3 + j) as f64);
        assert_eq!(sample_bilinear(&p, 1.0, 2.0, Edge::Clamp), 5.0);
        assert_eq!(sample_bilinear(&p, 0.5, 0.5, Edge::Clamp), 2.0);
        assert_eq!(sample_bilinear(&p, -1.0, 0.0, Edge::Zero), 0.0);
    }

    #[test]
    fn resize_identity() {
        let p = Plane::from_fn(5, 4, |i, j| (i + j) as f64);
        assert_eq!(resize_bilinear(&p, 5, 4), p);
    }
}
