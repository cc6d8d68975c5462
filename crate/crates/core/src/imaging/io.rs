use std::fs;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageBuffer, Luma, Rgb, RgbImage};

use super::{Image, LandmarkSet, Point};
use crate::{Error, Result};

impl Image {
    /// Reads an 8-bit image. Grayscale files load as one channel, everything
    /// else as RGB.
    pub fn read(path: impl AsRef<Path>) -> Result<Image> {
        let path = path.as_ref();
        let dynamic = image::open(path).map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::format(path, other.to_string()),
        })?;
        Ok(Self::from_dynamic(dynamic))
    }

    pub fn from_dynamic(dynamic: DynamicImage) -> Image {
        match dynamic {
            DynamicImage::ImageLuma8(g) => {
                let (w, h) = g.dimensions();
                Image::from_u8(h as usize, w as usize, 1, g.as_raw()).expect("dims match buffer")
            }
            other => {
                let rgb = other.to_rgb8();
                let (w, h) = rgb.dimensions();
                Image::from_u8(h as usize, w as usize, 3, rgb.as_raw()).expect("dims match buffer")
            }
        }
    }

    pub fn to_dynamic(&self) -> DynamicImage {
        let (w, h) = (self.width() as u32, self.height() as u32);
        let bytes = self.to_u8();
        if self.channels() == 1 {
            let g: GrayImage = ImageBuffer::<Luma<u8>, _>::from_raw(w, h, bytes).expect("buffer size");
            DynamicImage::ImageLuma8(g)
        } else {
            let rgb: RgbImage = ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, bytes).expect("buffer size");
            DynamicImage::ImageRgb8(rgb)
        }
    }

    /// Writes an 8-bit PNG.
    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.to_dynamic()
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Reads 68 landmarks from either a JSON array of `[x, y]` pairs or a
/// two-column CSV (an optional non-numeric header row is skipped).
pub fn read_landmarks(path: impl AsRef<Path>) -> Result<LandmarkSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_landmarks(&text).map_err(|reason| Error::format(path, reason))
}

fn parse_landmarks(text: &str) -> std::result::Result<LandmarkSet, String> {
    let trimmed = text.trim_start();
    let points = if trimmed.starts_with('[') {
        let raw: Vec<[f64; 2]> = serde_json::from_str(trimmed).map_err(|e| e.to_string())?;
        raw.into_iter().map(|[x, y]| Point::new(x, y)).collect()
    } else {
        let mut pts = Vec::new();
        for (lineno, line) in trimmed.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 2 {
                return Err(format!("line {}: expected 2 columns, got {}", lineno + 1, cols.len()));
            }
            match (cols[0].parse::<f64>(), cols[1].parse::<f64>()) {
                (Ok(x), Ok(y)) => pts.push(Point::new(x, y)),
                _ if lineno == 0 && pts.is_empty() => continue,
                _ => return Err(format!("line {}: non-numeric coordinate", lineno + 1)),
            }
        }
        pts
    };
    LandmarkSet::new(points).map_err(|e| e.to_string())
}

pub fn write_landmarks_json(landmarks: &LandmarkSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let raw: Vec<[f64; 2]> = landmarks.clone().into();
    let text = serde_json::to_string(&raw)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
