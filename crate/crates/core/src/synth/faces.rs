//! Procedural face-like images with 68-point landmarks.
//!
//! Stand-ins for a face corpus in tests, demos and the toy training run:
//! a textured background, an elliptical skin region with shading and
//! fine texture, and darker eyes, brows and mouth placed at the landmarks.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::imaging::filter::gaussian_blur;
use crate::imaging::{write_landmarks_json, Image, LandmarkSet, Plane, Point};
use crate::rng::{mix, SeedStream};
use crate::{Error, Result};

/// Landmarks in face-normalized coordinates: `x` in units of the horizontal
/// radius, `y` in units of the vertical radius (y down), origin at the face
/// centre. Order follows the common 68-point layout.
fn template() -> Vec<(f64, f64)> {
    let mut pts = Vec::with_capacity(68);
    // jaw 0..=16, ear to ear through the chin
    for k in 0..17 {
        let phi = PI - k as f64 * PI / 16.0;
        pts.push((0.92 * phi.cos(), -0.15 + 1.0 * phi.sin()));
    }
    // brows 17..=26
    for side in [-1.0, 1.0] {
        for k in 0..5 {
            let t = k as f64 / 4.0;
            let x = if side < 0.0 { -0.72 + 0.55 * t } else { 0.17 + 0.55 * t };
            let arch = 0.06 * (PI * t).sin();
            pts.push((x, -0.42 - arch));
        }
    }
    // nose bridge 27..=30
    for k in 0..4 {
        pts.push((0.0, -0.25 + 0.14 * k as f64));
    }
    // nostrils 31..=35
    for k in 0..5 {
        pts.push((
            -0.16 + 0.08 * k as f64,
            0.24 - 0.03 * (1.0 - ((k as f64 - 2.0) / 2.0).powi(2)),
        ));
    }
    // eyes 36..=47
    for cx in [-0.38, 0.38] {
        for k in 0..6 {
            let a = PI - k as f64 * PI / 3.0;
            pts.push((cx + 0.15 * a.cos(), -0.2 - 0.06 * a.sin()));
        }
    }
    // outer lip 48..=59
    for k in 0..12 {
        let a = PI - k as f64 * 2.0 * PI / 12.0;
        pts.push((0.32 * a.cos(), 0.5 - 0.12 * a.sin()));
    }
    // inner lip 60..=67
    for k in 0..8 {
        let a = PI - k as f64 * 2.0 * PI / 8.0;
        pts.push((0.2 * a.cos(), 0.5 - 0.05 * a.sin()));
    }
    pts
}

fn smooth_field(size: usize, sigma: f64, rng: &mut SeedStream) -> Plane {
    let raw = Plane::from_fn(size, size, |_, _| rng.normal());
    let blurred = gaussian_blur(&raw, sigma);
    let peak = blurred.data().iter().fold(1e-12f64, |m, v| m.max(v.abs()));
    blurred.map(|v| v / peak)
}

fn inside_ellipse(x: f64, y: f64, cx: f64, cy: f64, rx: f64, ry: f64) -> f64 {
    let d = ((x - cx) / rx).powi(2) + ((y - cy) / ry).powi(2);
    // soft edge about one pixel wide
    (1.0 - d).mul_add(rx.min(ry) / 2.0, 0.5).clamp(0.0, 1.0)
}

/// Renders a `size x size` RGB face and its landmarks from `seed`.
pub fn synthetic_face(size: usize, seed: u64) -> (Image, LandmarkSet) {
    let mut rng = SeedStream::new(seed);
    let s = size as f64;
    let cx = s / 2.0 + rng.range(-0.04, 0.04) * s;
    let cy = s / 2.0 + rng.range(-0.04, 0.04) * s;
    let rx = s * rng.range(0.26, 0.32);
    let ry = rx * rng.range(1.15, 1.3);
    let roll = rng.range(-0.12, 0.12);
    let (sin, cos) = roll.sin_cos();

    let to_pixel = |(u, v): (f64, f64)| -> (f64, f64) {
        let (x, y) = (u * rx, v * ry);
        (cx + cos * x - sin * y, cy + sin * x + cos * y)
    };
    let landmark_px: Vec<(f64, f64)> = template().into_iter().map(to_pixel).collect();

    let bg_base: Vec<f64> = (0..3).map(|_| rng.range(0.15, 0.85)).collect();
    let skin: Vec<f64> = {
        let tone = rng.range(0.35, 0.85);
        vec![tone, tone * rng.range(0.72, 0.85), tone * rng.range(0.55, 0.72)]
    };
    let bg_field: Vec<Plane> = (0..3).map(|_| smooth_field(size, s / 10.0, &mut rng)).collect();
    let skin_field = smooth_field(size, s / 16.0, &mut rng);
    let grain = smooth_field(size, 0.6, &mut rng);
    let light = (rng.range(-1.0, 1.0), rng.range(-1.0, 1.0));

    let eye_r = (0.15 * rx, 0.06 * ry);
    let eyes = [to_pixel((-0.38, -0.2)), to_pixel((0.38, -0.2))];
    let brows = [to_pixel((-0.45, -0.45)), to_pixel((0.45, -0.45))];
    let mouth = to_pixel((0.0, 0.5));
    let nose = to_pixel((0.0, 0.12));
    let iris = rng.range(0.05, 0.3);
    let lip: Vec<f64> = vec![rng.range(0.5, 0.8), rng.range(0.15, 0.35), rng.range(0.2, 0.35)];

    let image = Image::from_fn(size, size, 3, |i, j, c| {
        let (y, x) = (i as f64, j as f64);
        // undo roll for feature tests in face frame
        let lx = cos * (x - cx) + sin * (y - cy) + cx;
        let ly = -sin * (x - cx) + cos * (y - cy) + cy;
        let face = inside_ellipse(lx, ly, cx, cy, rx, ry);
        let bg = bg_base[c] + 0.18 * bg_field[c].get(i, j);
        let shade = 1.0 + 0.12 * (light.0 * (lx - cx) / rx + light.1 * (ly - cy) / ry);
        let mut v = skin[c] * shade + 0.05 * skin_field.get(i, j);
        let unroll = |p: (f64, f64)| {
            (
                cos * (p.0 - cx) + sin * (p.1 - cy) + cx,
                -sin * (p.0 - cx) + cos * (p.1 - cy) + cy,
            )
        };
        for e in eyes {
            let (ex, ey) = unroll(e);
            let w = inside_ellipse(lx, ly, ex, ey, eye_r.0, eye_r.1);
            let pupil = inside_ellipse(lx, ly, ex, ey, eye_r.1 * 0.9, eye_r.1 * 0.9);
            v = v * (1.0 - w) + 0.9 * w;
            v = v * (1.0 - pupil) + iris * pupil;
        }
        for b in brows {
            let (bx, by) = unroll(b);
            let w = inside_ellipse(lx, ly, bx, by, 0.28 * rx, 0.04 * ry);
            v = v * (1.0 - w) + 0.2 * skin[c] * w;
        }
        let (mx, my) = unroll(mouth);
        let w = inside_ellipse(lx, ly, mx, my, 0.32 * rx, 0.1 * ry);
        v = v * (1.0 - w) + lip[c] * w;
        let (nx, ny) = unroll(nose);
        let w = inside_ellipse(lx, ly, nx, ny, 0.08 * rx, 0.2 * ry);
        v *= 1.0 - 0.12 * w;
        face * v + (1.0 - face) * bg + 0.1 * grain.get(i, j)
    });

    let max = s - 1.0;
    let landmarks = LandmarkSet::new(
        landmark_px
            .into_iter()
            .map(|(x, y)| Point::new(x.clamp(0.0, max), y.clamp(0.0, max)))
            .collect(),
    )
    .expect("template has 68 points");
    (image, landmarks)
}

/// Writes `count` synthetic faces as `images/face_NNNN.png` and
/// `landmarks/face_NNNN.json` under `dir`. Face `k` uses seed `mix(seed, k)`.
pub fn write_face_corpus(dir: &Path, count: usize, size: usize, seed: u64) -> Result<()> {
    let images = dir.join("images");
    let landmarks = dir.join("landmarks");
    for d in [&images, &landmarks] {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let faces: Vec<(Image, LandmarkSet)> = (0..count)
        .into_par_iter()
        .map(|k| synthetic_face(size, mix(seed, k as u64)))
        .collect();
    for (k, (image, lm)) in faces.iter().enumerate() {
        image.write_png(images.join(format!("face_{k:04}.png")))?;
        write_landmarks_json(lm, landmarks.join(format!("face_{k:04}.json")))?;
    }
    Ok(())
}
