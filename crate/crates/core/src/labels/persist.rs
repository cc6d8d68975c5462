//! On-disk formats for label planes.
//!
//! * Raw blob: 8-byte magic, `u32` height, `u32` width (little-endian), then
//!   `height * width` little-endian `f64` values in row-major order. Lossless.
//! * 16-bit grayscale PNG storing `round(v * 65535)`; lossy, for viewing.

use std::fs;
use std::path::Path;

use image::{ImageBuffer, Luma};

use crate::imaging::Plane;
use crate::{Error, Result};

pub const PLANE_MAGIC: [u8; 8] = *b"BSPLANE\x01";

pub fn encode_plane_blob(plane: &Plane) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + plane.data().len() * 8);
    out.extend_from_slice(&PLANE_MAGIC);
    out.extend_from_slice(&(plane.height() as u32).to_le_bytes());
    out.extend_from_slice(&(plane.width() as u32).to_le_bytes());
    for v in plane.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_plane_blob(bytes: &[u8]) -> std::result::Result<Plane, String> {
    if bytes.len() < 16 || bytes[..8] != PLANE_MAGIC {
        return Err("missing plane magic".into());
    }
    let h = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let w = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if body.len() != h * w * 8 {
        return Err(format!(
            "expected {} data bytes for {h}x{w}, found {}",
            h * w * 8,
            body.len()
        ));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Plane::new(h, w, data).map_err(|e| e.to_string())
}

pub fn write_plane_blob(plane: &Plane, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_plane_blob(plane)).map_err(|e| Error::io(path, e))
}

pub fn read_plane_blob(path: impl AsRef<Path>) -> Result<Plane> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_plane_blob(&bytes).map_err(|r| Error::format(path, r))
}

/// Writes values in `[0, 1]` as a 16-bit PNG (values are clamped).
pub fn write_plane_png16(plane: &Plane, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let raw: Vec<u16> = plane
        .data()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16)
        .collect();
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(plane.width() as u32, plane.height() as u32, raw).expect("buffer size");
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::format(path, e.to_string()))
}

pub fn read_plane_png16(path: impl AsRef<Path>) -> Result<Plane> {
    let path = path.as_ref();
    let img = image::open(path)
        .map_err(|e| Error::format(path, e.to_string()))?
        .to_luma16();
    let (w, h) = img.dimensions();
    Plane::new(
        h as usize,
        w as usize,
        img.as_raw().iter().map(|&v| v as f64 / 65535.0).collect(),
    )
}
