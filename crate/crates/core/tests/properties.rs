use proptest::prelude::*;

use blendscope::eval::{auc, average_precision, ssim};
use blendscope::imaging::{blend, Image, Plane, SoftMask};
use blendscope::labels::{boundary_mask, consistency_gt, gaussian_radius, heatmap_gt, vulnerable_points, BoundaryMask};
use blendscope::losses::{consistency_loss, focal_heatmap_loss};
use blendscope::model::ops::{correlate, scatter, Kernel};
use blendscope::model::FeatureMap;

fn plane(h: usize, w: usize) -> impl Strategy<Value = Plane> {
    prop::collection::vec(0.0f64..=1.0, h * w).prop_map(move |v| Plane::new(h, w, v).unwrap())
}

fn sized_plane() -> impl Strategy<Value = Plane> {
    (2usize..20, 2usize..20).prop_flat_map(|(h, w)| plane(h, w))
}

fn quantized_plane() -> impl Strategy<Value = Plane> {
    (2usize..16, 2usize..16, 1u32..8).prop_flat_map(|(h, w, levels)| {
        prop::collection::vec(0..=levels, h * w)
            .prop_map(move |v| Plane::new(h, w, v.into_iter().map(|q| q as f64 / levels as f64).collect()).unwrap())
    })
}

fn scored_labels() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    prop::collection::vec((0u32..20, 0u8..2), 2..80).prop_map(|mut v| {
        v[0].1 = 0;
        v[1].1 = 1;
        v.into_iter().map(|(s, l)| (s as f64 / 20.0, l)).unzip()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn boundary_is_symmetric_and_bounded(p in sized_plane()) {
        let m = SoftMask::new(p.clone()).unwrap();
        let flipped = SoftMask::new(p.map(|v| 1.0 - v)).unwrap();
        let b = boundary_mask(&m);
        let bf = boundary_mask(&flipped);
        prop_assert_eq!(b.data(), bf.data());
        prop_assert!(b.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn vulnerable_points_are_exactly_the_maxima(p in quantized_plane()) {
        let b = boundary_mask(&SoftMask::new(p).unwrap());
        let pts = vulnerable_points(&b);
        let peak = b.max();
        let count = b.data().iter().filter(|&&v| v == peak && peak > 0.0).count();
        prop_assert_eq!(pts.len(), count);
        for &(i, j) in pts.points() {
            prop_assert_eq!(b.get(i, j), peak);
        }
    }

    #[test]
    fn heatmap_peaks_at_points_and_stays_in_unit_range(p in quantized_plane()) {
        let b = boundary_mask(&SoftMask::new(p).unwrap());
        let pts = vulnerable_points(&b);
        let h = heatmap_gt(&pts, &b, 0.7).unwrap();
        prop_assert!(h.data().iter().all(|v| (0.0..=1.0).contains(v)));
        for &(i, j) in pts.points() {
            prop_assert_eq!(h.get(i, j), 1.0);
        }
        if let Some(&anchor) = pts.points().first() {
            let c = consistency_gt(&b, Some(anchor), false).unwrap();
            prop_assert_eq!(c.get(anchor.0, anchor.1), 1.0);
            prop_assert!(c.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn non_vulnerable_anchor_is_rejected(p in sized_plane()) {
        let b = BoundaryMask::from_plane(p).unwrap();
        let peak = b.max();
        if let Some(k) = b.data().iter().position(|&v| v < peak) {
            let anchor = (k / b.width(), k % b.width());
            prop_assert!(consistency_gt(&b, Some(anchor), false).is_err());
        }
    }

    #[test]
    fn blend_stays_between_inputs(
        (fg, bg, m) in (1usize..10, 1usize..10).prop_flat_map(|(h, w)| (plane(h, w), plane(h, w), plane(h, w)))
    ) {
        let img = |p: &Plane| Image::from_planes(std::slice::from_ref(p)).unwrap();
        let out = blend(&img(&fg), &img(&bg), &SoftMask::new(m.clone()).unwrap()).unwrap();
        for k in 0..out.data().len() {
            let (a, b) = (fg.data()[k], bg.data()[k]);
            let v = out.data()[k];
            prop_assert!(v >= a.min(b) - 1e-15 && v <= a.max(b) + 1e-15);
            if m.data()[k] == 1.0 { prop_assert_eq!(v, a); }
            if m.data()[k] == 0.0 { prop_assert_eq!(v, b); }
        }
    }

    #[test]
    fn radius_shrinks_as_threshold_grows(h in 1.0f64..200.0, w in 1.0f64..200.0, t in 0.05f64..0.9) {
        let r = gaussian_radius(h, w, t).unwrap();
        let r2 = gaussian_radius(h, w, t + 0.05).unwrap();
        prop_assert!(r > 0.0 && r2 <= r);
        prop_assert!(r <= h.max(w));
    }

    #[test]
    fn auc_respects_order_and_complement((scores, labels) in scored_labels()) {
        let a = auc(&scores, &labels).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        let squashed: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp()).collect();
        prop_assert_eq!(auc(&squashed, &labels).unwrap(), a);
        let flipped: Vec<f64> = scores.iter().map(|s| -s).collect();
        prop_assert!((auc(&flipped, &labels).unwrap() - (1.0 - a)).abs() < 1e-12);
        let ap = average_precision(&scores, &labels).unwrap();
        prop_assert!(ap > 0.0 && ap <= 1.0);
    }

    #[test]
    fn losses_are_non_negative_and_minimal_at_target(p in plane(4, 4), t in plane(4, 4)) {
        let pred = p.map(|v| v.clamp(0.01, 0.99));
        prop_assert!(focal_heatmap_loss(&pred, &t, 2.0).unwrap() >= 0.0);
        let at_target = consistency_loss(&t.map(|v| v.clamp(0.01, 0.99)), &t).unwrap();
        prop_assert!(consistency_loss(&pred, &t).unwrap() >= at_target - 0.05);
    }

    #[test]
    fn correlate_and_scatter_are_adjoint(
        c_in in 1usize..4, c_out in 1usize..4, side in 4usize..12, stride in 1usize..3, k in prop::sample::select(vec![1usize, 3, 4]),
        seed in any::<u64>()
    ) {
        let mut rng = blendscope::rng::SeedStream::new(seed);
        let pad = k / 2;
        let x = FeatureMap::new(c_in, side, side, (0..c_in * side * side).map(|_| rng.normal()).collect()).unwrap();
        let w = Kernel::new(c_out, c_in, k, (0..c_out * c_in * k * k).map(|_| rng.normal()).collect()).unwrap();
        let y = correlate(&x, &w, stride, pad).unwrap();
        let g = FeatureMap::new(y.channels, y.height, y.width, (0..y.data.len()).map(|_| rng.normal()).collect()).unwrap();
        let lhs = y.dot(&g);
        let rhs = x.dot(&scatter(&g, &w, stride, pad, side, side).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn ssim_is_symmetric_and_one_on_identity(a in plane(12, 12), b in plane(12, 12)) {
        let (a, b) = (Image::from_planes(&[a]).unwrap(), Image::from_planes(&[b]).unwrap());
        prop_assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-9);
        prop_assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn bounded_checks_reject_out_of_range_boundaries() {
    assert!(BoundaryMask::from_plane(Plane::filled(2, 2, 1.5)).is_err());
}
