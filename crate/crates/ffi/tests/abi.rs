use std::ffi::{c_char, CString};
use std::ptr;

use blendscope::synth::synthetic_face;
use blendscope_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { bs_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn plane(h: usize, w: usize, data: &[f64]) -> *mut BsPlane {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { bs_plane_new(h, w, data.as_ptr(), &mut p) }, BsStatus::Ok);
    p
}

fn plane_values(p: *const BsPlane) -> Vec<f64> {
    let (mut h, mut w) = (0, 0);
    unsafe {
        assert_eq!(bs_plane_dims(p, &mut h, &mut w), BsStatus::Ok);
        let mut v = vec![0.0; h * w];
        assert_eq!(bs_plane_copy(p, v.as_mut_ptr(), v.len()), BsStatus::Ok);
        v
    }
}

#[test]
fn null_arguments_are_reported() {
    let mut out = 0.0;
    let status = unsafe { bs_auc(ptr::null(), ptr::null(), 4, &mut out) };
    assert_eq!(status, BsStatus::NullPointer);
    assert!(last_error().contains("null"));
    unsafe {
        bs_image_free(ptr::null_mut());
        bs_plane_free(ptr::null_mut());
        bs_bundle_free(ptr::null_mut());
    }
}

#[test]
fn library_errors_map_to_status_codes() {
    let scores = [0.1, 0.2];
    let labels = [1u8, 1];
    let mut out = -1.0;
    let status = unsafe { bs_auc(scores.as_ptr(), labels.as_ptr(), 2, &mut out) };
    assert_eq!(status, BsStatus::UndefinedMetric);
    assert_eq!(out, -1.0);

    let mut p = ptr::null_mut();
    let status = unsafe { bs_plane_new(2, 2, [0.0; 4].as_ptr(), ptr::null_mut()) };
    assert_eq!(status, BsStatus::NullPointer);
    let status = unsafe { bs_plane_new(2, 2, [0.0, 0.5, 1.5, 0.0].as_ptr(), &mut p) };
    assert_eq!(status, BsStatus::Ok);
    let mut b = ptr::null_mut();
    assert_eq!(unsafe { bs_boundary_mask(p, &mut b) }, BsStatus::Domain);
    assert!(b.is_null());
    assert!(!last_error().is_empty());
    unsafe { bs_plane_free(p) };
}

#[test]
fn error_message_truncates_and_reports_length() {
    let mut out = 0.0;
    unsafe { bs_classification_loss(0.0, 7, 0.1, &mut out) };
    let full = unsafe { bs_last_error_message(ptr::null_mut(), 0) };
    let mut small = [1 as c_char; 4];
    let n = unsafe { bs_last_error_message(small.as_mut_ptr(), small.len()) };
    assert_eq!(n, full);
    assert_eq!(small[3], 0);
}

#[test]
fn metrics_and_losses() {
    let scores = [0.9, 0.8, 0.3, 0.1];
    let labels = [1u8, 0, 1, 0];
    let (mut auc, mut ap) = (0.0, 0.0);
    unsafe {
        assert_eq!(bs_auc(scores.as_ptr(), labels.as_ptr(), 4, &mut auc), BsStatus::Ok);
        assert_eq!(
            bs_average_precision(scores.as_ptr(), labels.as_ptr(), 4, &mut ap),
            BsStatus::Ok
        );
    }
    assert!((auc - 0.75).abs() < 1e-12);
    assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);

    let mut total = 0.0;
    unsafe { assert_eq!(bs_total_loss(1.0, 2.0, 3.0, 10.0, 100.0, &mut total), BsStatus::Ok) };
    assert_eq!(total, 321.0);

    let mut bce = 0.0;
    unsafe { assert_eq!(bs_classification_loss(0.0, 1, 0.1, &mut bce), BsStatus::Ok) };
    assert!((bce - std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn label_pipeline_through_handles() {
    let (h, w) = (9, 9);
    let mask: Vec<f64> = (0..h * w)
        .map(|k| {
            let (i, j) = ((k / w) as f64 - 4.0, (k % w) as f64 - 4.0);
            (1.0 - (i * i + j * j).sqrt() / 5.0).clamp(0.0, 1.0)
        })
        .collect();
    let m = plane(h, w, &mask);
    let mut b = ptr::null_mut();
    unsafe { assert_eq!(bs_boundary_mask(m, &mut b), BsStatus::Ok) };
    let bv = plane_values(b);
    for (x, y) in mask.iter().zip(&bv) {
        assert!((y - 4.0 * x * (1.0 - x)).abs() < 1e-12);
    }

    let mut count = 0;
    unsafe {
        assert_eq!(
            bs_vulnerable_points(b, ptr::null_mut(), ptr::null_mut(), 0, &mut count),
            BsStatus::Ok
        )
    };
    assert!(count > 0);
    let (mut rows, mut cols) = (vec![0; count], vec![0; count]);
    unsafe {
        assert_eq!(
            bs_vulnerable_points(b, rows.as_mut_ptr(), cols.as_mut_ptr(), count, &mut count),
            BsStatus::Ok
        )
    };
    let peak = bv.iter().cloned().fold(f64::MIN, f64::max);
    for (&i, &j) in rows.iter().zip(&cols) {
        assert_eq!(bv[i * w + j], peak);
    }

    let mut heat = ptr::null_mut();
    unsafe { assert_eq!(bs_heatmap(b, 0.7, &mut heat), BsStatus::Ok) };
    let hv = plane_values(heat);
    for (&i, &j) in rows.iter().zip(&cols) {
        assert_eq!(hv[i * w + j], 1.0);
    }

    let mut cons = ptr::null_mut();
    unsafe { assert_eq!(bs_consistency(b, rows[0], cols[0], 0, &mut cons), BsStatus::Ok) };
    let cv = plane_values(cons);
    assert_eq!(cv.len(), h * w);
    assert_eq!(cv[rows[0] * w + cols[0]], 1.0);

    let pred = plane(h, w, &vec![0.5; h * w]);
    let mut focal = 0.0;
    unsafe { assert_eq!(bs_focal_heatmap_loss(pred, heat, 2.0, &mut focal), BsStatus::Ok) };
    assert_eq!(
        unsafe { bs_focal_heatmap_loss(heat, heat, 2.0, &mut focal) },
        BsStatus::Domain
    );
    assert!(focal.is_finite() && focal >= 0.0);

    unsafe {
        bs_plane_free(m);
        bs_plane_free(b);
        bs_plane_free(heat);
        bs_plane_free(cons);
        bs_plane_free(pred);
    }
}

#[test]
fn sbi_bundle_round_trip() {
    let (face, lm) = synthetic_face(64, 3);
    let xy: Vec<f64> = lm.points().iter().flat_map(|p| [p.x, p.y]).collect();
    let mut img = ptr::null_mut();
    let mut bundle = ptr::null_mut();
    unsafe {
        assert_eq!(bs_image_new(64, 64, 3, face.data().as_ptr(), &mut img), BsStatus::Ok);
        assert_eq!(bs_sbi_sample(img, xy.as_ptr(), 11, 64, &mut bundle), BsStatus::Ok);
        let mut label = 9;
        assert_eq!(bs_bundle_label(bundle, &mut label), BsStatus::Ok);
        assert_eq!(label, 1);

        let mut out_img = ptr::null_mut();
        assert_eq!(bs_bundle_image(bundle, &mut out_img), BsStatus::Ok);
        let (mut h, mut w, mut c) = (0, 0, 0);
        assert_eq!(bs_image_dims(out_img, &mut h, &mut w, &mut c), BsStatus::Ok);
        assert_eq!((h, w, c), (64, 64, 3));
        let mut small = vec![0.0; 10];
        assert_eq!(
            bs_image_copy(out_img, small.as_mut_ptr(), small.len()),
            BsStatus::Dimension
        );

        let mut mask = ptr::null_mut();
        assert_eq!(bs_bundle_map(bundle, BsMap::Mask, &mut mask), BsStatus::Ok);
        let mut blended = ptr::null_mut();
        assert_eq!(bs_blend(out_img, img, mask, &mut blended), BsStatus::Ok);

        let mut s = 0.0;
        assert_eq!(bs_ssim(img, img, &mut s), BsStatus::Ok);
        assert!((s - 1.0).abs() < 1e-12);

        let mut noisy = ptr::null_mut();
        assert_eq!(bs_perturb(img, BsPerturbKind::Noise, 3, 5, &mut noisy), BsStatus::Ok);
        assert_eq!(
            bs_perturb(img, BsPerturbKind::Noise, 6, 5, &mut noisy),
            BsStatus::Config
        );

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("x.png").to_str().unwrap()).unwrap();
        assert_eq!(bs_image_write_png(noisy, path.as_ptr()), BsStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(bs_image_read(path.as_ptr(), &mut back), BsStatus::Ok);
        let missing = CString::new(dir.path().join("none.png").to_str().unwrap()).unwrap();
        let mut none = ptr::null_mut();
        assert_eq!(bs_image_read(missing.as_ptr(), &mut none), BsStatus::Io);

        for p in [img, out_img, blended, noisy, back] {
            bs_image_free(p);
        }
        bs_plane_free(mask);
        bs_bundle_free(bundle);
    }
}

#[test]
fn gaussian_radius_matches_library() {
    let mut r = 0.0;
    unsafe { assert_eq!(bs_gaussian_radius(10.0, 20.0, 0.7, &mut r), BsStatus::Ok) };
    assert_eq!(r, blendscope::labels::gaussian_radius(10.0, 20.0, 0.7).unwrap());
}
