use crate::{Error, Result};

/// Largest corner displacement `r` that keeps a perturbed box at IoU at least
/// `iou_threshold` with a `box_height x box_width` box.
///
/// Three perturbations are considered, each giving a quadratic in `r`:
/// the box translated by `r` along both axes, shrunk by `r` on every side, and
/// grown by `r` on every side. The radius is the smallest of the three roots.
pub fn gaussian_radius(box_height: f64, box_width: f64, iou_threshold: f64) -> Result<f64> {
    if !(box_height > 0.0 && box_width > 0.0) {
        return Err(Error::Domain(format!(
            "box dimensions must be positive, got {box_height}x{box_width}"
        )));
    }
    if !(iou_threshold > 0.0 && iou_threshold < 1.0) {
        return Err(Error::Domain(format!("IoU threshold {iou_threshold} outside (0, 1)")));
    }
    let (h, w, t) = (box_height, box_width, iou_threshold);
    let s = h + w;
    let area = h * w;

    // translated: (h-r)(w-r) / (2hw - (h-r)(w-r)) = t
    let c1 = area * (1.0 - t) / (1.0 + t);
    let r1 = (s - (s * s - 4.0 * c1).sqrt()) / 2.0;

    // shrunk: (h-2r)(w-2r) / hw = t
    let r2 = (2.0 * s - (4.0 * s * s - 16.0 * (1.0 - t) * area).sqrt()) / 8.0;

    // grown: hw / ((h+2r)(w+2r)) = t
    let a3 = 4.0 * t;
    let b3 = 2.0 * t * s;
    let c3 = (t - 1.0) * area;
    let r3 = (-b3 + (b3 * b3 - 4.0 * a3 * c3).sqrt()) / (2.0 * a3);

    Ok(r1.min(r2).min(r3))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_input() {
        assert!(gaussian_radius(0.0, 4.0, 0.7).is_err());
        assert!(gaussian_radius(4.0, -1.0, 0.7).is_err());
        assert!(gaussian_radius(4.0, 4.0, 1.0).is_err());
        assert!(gaussian_radius(4.0, 4.0, 0.0).is_err());
    }

    #[test]
    fn vanishes_as_threshold_approaches_one() {
        let mut prev = f64::INFINITY;
        for t in [0.9, 0.99, 0.999, 0.999_999] {
            let r = gaussian_radius(20.0, 30.0, t).unwrap();
            assert!(r > 0.0 && r < prev);
            prev = r;
        }
        assert!(prev < 1e-4);
    }

    #[test]
    fn square_box_value() {
        // shrink case binds for squares: r = (2s - sqrt(4s^2 - 16(1-t)hw)) / 8
        let r = gaussian_radius(10.0, 10.0, 0.7).unwrap();
        let expect = (40.0 - (1600.0f64 - 480.0).sqrt()) / 8.0;
        assert!((r - expect).abs() < 1e-12);
    }
}
