use super::{Image, SoftMask};
use crate::{Error, Result};

/// Composites `foreground` over `background` with per-pixel weight `mask`:
/// `m * fg + (1 - m) * bg`, applied to every channel.
pub fn blend(foreground: &Image, background: &Image, mask: &SoftMask) -> Result<Image> {
    if !foreground.same_dims(background) {
        return Err(Error::Dimension(format!(
            "foreground {}x{}x{} vs background {}x{}x{}",
            foreground.height(),
            foreground.width(),
            foreground.channels(),
            background.height(),
            background.width(),
            background.channels()
        )));
    }
    if mask.dims() != (foreground.height(), foreground.width()) {
        return Err(Error::Dimension(format!(
            "mask {}x{} vs image {}x{}",
            mask.height(),
            mask.width(),
            foreground.height(),
            foreground.width()
        )));
    }
    let c = foreground.channels();
    let m = mask.data();
    let data = foreground
        .data()
        .iter()
        .zip(background.data())
        .enumerate()
        .map(|(k, (&f, &b))| {
            let w = m[k / c];
            (w * f + (1.0 - w) * b).clamp(0.0, 1.0)
        })
        .collect();
    Image::new(foreground.height(), foreground.width(), c, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;

    fn random_image(s: &mut SeedStream, h: usize, w: usize) -> Image {
        Image::from_fn(h, w, 3, |_, _, _| s.uniform())
    }

    fn random_mask(s: &mut SeedStream, h: usize, w: usize) -> SoftMask {
        SoftMask::from_values(h, w, (0..h * w).map(|_| s.uniform()).collect()).unwrap()
    }

    #[test]
    fn identity_cases() {
        let mut s = SeedStream::new(3);
        let f = random_image(&mut s, 4, 5);
        let b = random_image(&mut s, 4, 5);
        assert_eq!(blend(&f, &b, &SoftMask::ones(4, 5)).unwrap(), f);
        assert_eq!(blend(&f, &b, &SoftMask::zeros(4, 5)).unwrap(), b);
    }

    #[test]
    fn half_mask_on_constants() {
        let f = Image::filled(3, 3, 3, 1.0);
        let b = Image::filled(3, 3, 3, 0.0);
        let out = blend(&f, &b, &SoftMask::filled(3, 3, 0.5).unwrap()).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn shape_mismatch() {
        let f = Image::filled(3, 3, 3, 1.0);
        let b = Image::filled(3, 4, 3, 0.0);
        assert!(blend(&f, &b, &SoftMask::ones(3, 3)).is_err());
        let b = Image::filled(3, 3, 1, 0.0);
        assert!(blend(&f, &b, &SoftMask::ones(3, 3)).is_err());
        let b = Image::filled(3, 3, 3, 0.0);
        assert!(blend(&f, &b, &SoftMask::ones(2, 3)).is_err());
    }

    #[test]
    fn linear_in_mask() {
        let mut s = SeedStream::new(11);
        for _ in 0..20 {
            let f = random_image(&mut s, 6, 6);
            let b = random_image(&mut s, 6, 6);
            let m1 = random_mask(&mut s, 6, 6);
            let m2 = random_mask(&mut s, 6, 6);
            let a = s.uniform();
            let mix = SoftMask::from_values(
                6,
                6,
                m1.data()
                    .iter()
                    .zip(m2.data())
                    .map(|(x, y)| a * x + (1.0 - a) * y)
                    .collect(),
            )
            .unwrap();
            let lhs = blend(&f, &b, &mix).unwrap();
            let r1 = blend(&f, &b, &m1).unwrap();
            let r2 = blend(&f, &b, &m2).unwrap();
            for k in 0..lhs.data().len() {
                let rhs = a * r1.data()[k] + (1.0 - a) * r2.data()[k];
                assert!((lhs.data()[k] - rhs).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn self_blend_is_identity() {
        let mut s = SeedStream::new(12);
        for _ in 0..20 {
            let x = random_image(&mut s, 5, 7);
            let m = random_mask(&mut s, 5, 7);
            let out = blend(&x, &x, &m).unwrap();
            for (a, b) in out.data().iter().zip(x.data()) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
