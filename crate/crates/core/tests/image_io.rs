use blendscope::imaging::Image;
use blendscope::rng::{mix, SeedStream};
use blendscope::synth::{jpeg_round_trip, synthetic_face};
use blendscope::Error;

const JPEG_Q100_TOL: f64 = 2.0 / 255.0 + 1e-12;

fn max_diff(a: &Image, b: &Image) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn random_u8_image(seed: u64, h: usize, w: usize, c: usize) -> Image {
    let mut rng = SeedStream::new(seed);
    Image::from_fn(h, w, c, |_, _, _| rng.below(256) as f64 / 255.0)
}

#[test]
fn jpeg_quality_100_on_50_random_images() {
    for k in 0..50u64 {
        let img = random_u8_image(mix(5, k), 24 + k as usize % 9, 32, 3);
        let d = max_diff(&img, &jpeg_round_trip(&img, 100));
        assert!(d <= JPEG_Q100_TOL, "image {k}: max change {} / 255", d * 255.0);
    }
}

#[test]
fn jpeg_quality_100_on_faces_and_grayscale() {
    for k in 0..10u64 {
        let (face, _) = synthetic_face(64, k);
        let face = Image::from_u8(64, 64, 3, &face.to_u8()).unwrap();
        assert!(max_diff(&face, &jpeg_round_trip(&face, 100)) <= JPEG_Q100_TOL);
        let gray = random_u8_image(mix(6, k), 16, 40, 1);
        let out = jpeg_round_trip(&gray, 100);
        assert_eq!(out.channels(), 1);
        assert!(max_diff(&gray, &out) <= JPEG_Q100_TOL);
    }
}

#[test]
fn lower_quality_loses_more() {
    let img = random_u8_image(9, 32, 32, 3);
    let hi = max_diff(&img, &jpeg_round_trip(&img, 100));
    let lo = max_diff(&img, &jpeg_round_trip(&img, 30));
    assert!(lo > hi);
}

#[test]
fn png_round_trip_is_exact_at_8_bits() {
    let dir = tempfile::tempdir().unwrap();
    for (k, c) in [(0u64, 1usize), (1, 3)] {
        let img = random_u8_image(k, 17, 23, c);
        let path = dir.path().join(format!("img{k}.png"));
        img.write_png(&path).unwrap();
        let back = Image::read(&path).unwrap();
        assert_eq!(back, img);
    }
}

#[test]
fn read_errors_are_classified() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        Image::read(dir.path().join("missing.png")),
        Err(Error::Io { .. })
    ));
    let junk = dir.path().join("junk.png");
    std::fs::write(&junk, b"not an image").unwrap();
    assert!(matches!(Image::read(&junk), Err(Error::Format { .. })));
}
