//! Pixel containers and the pixel-level primitives the synthesis pipeline is
//! built from.

mod blend;
mod deform;
pub mod filter;
mod hull;
mod io;

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use blend::blend;
pub use deform::{deform_mask, DeformParams};
pub use hull::{convex_hull, convex_hull_mask, Point};
pub use io::{read_landmarks, write_landmarks_json};

/// Number of points in the 68-point facial landmark layout.
pub const LANDMARK_COUNT: usize = 68;

/// A single-channel grid of reals, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Plane {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Dimension(format!(
                "plane {height}x{width} needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for i in 0..height {
            for j in 0..width {
                data.push(f(i, j));
            }
        }
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.width + j] = v;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Plane {
        Plane {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len().max(1) as f64
    }

    /// Mirror left-right.
    pub fn hflip(&self) -> Plane {
        Plane::from_fn(self.height, self.width, |i, j| self.get(i, self.width - 1 - j))
    }

    fn in_unit_range(&self) -> bool {
        self.data.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v))
    }
}

/// A soft blending mask with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftMask(Plane);

impl SoftMask {
    pub fn new(plane: Plane) -> Result<Self> {
        if !plane.in_unit_range() {
            return Err(Error::Domain("mask values must lie in [0, 1]".into()));
        }
        Ok(Self(plane))
    }

    pub fn from_values(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(Plane::new(height, width, values)?)
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self(Plane::zeros(height, width))
    }

    pub fn ones(height: usize, width: usize) -> Self {
        Self(Plane::filled(height, width, 1.0))
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(Plane::filled(height, width, value))
    }

    /// Wraps a plane whose values the caller has already clamped to `[0, 1]`.
    pub(crate) fn from_plane_unchecked(plane: Plane) -> Self {
        debug_assert!(plane.in_unit_range());
        Self(plane)
    }

    pub fn plane(&self) -> &Plane {
        &self.0
    }

    pub fn into_plane(self) -> Plane {
        self.0
    }

    /// Multiplies every value by `factor` in `[0, 1]`.
    pub fn scaled(&self, factor: f64) -> Result<SoftMask> {
        if !(0.0..=1.0).contains(&factor) {
            return Err(Error::Domain(format!("mask scale {factor} outside [0, 1]")));
        }
        Ok(Self(self.0.map(|v| v * factor)))
    }

    /// Box-average downsampling by an integer factor.
    pub fn downsample(&self, factor: usize) -> Result<SoftMask> {
        Ok(Self(filter::box_downsample(&self.0, factor)?))
    }

    pub fn hflip(&self) -> SoftMask {
        Self(self.0.hflip())
    }
}

impl Deref for SoftMask {
    type Target = Plane;
    fn deref(&self) -> &Plane {
        &self.0
    }
}

/// An `H x W x C` image with intensities in `[0, 1]`, stored row-major with
/// interleaved channels.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Dimension(format!("unsupported channel count {channels}")));
        }
        if data.len() != height * width * channels {
            return Err(Error::Dimension(format!(
                "image {height}x{width}x{channels} needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)) {
            return Err(Error::Domain("image intensities must lie in [0, 1]".into()));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        assert!((0.0..=1.0).contains(&value));
        Self {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    /// Builds an image from a per-pixel function; results are clamped to `[0, 1]`.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for i in 0..height {
            for j in 0..width {
                for c in 0..channels {
                    data.push(f(i, j, c).clamp(0.0, 1.0));
                }
            }
        }
        Self {
            height,
            width,
            channels,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, c: usize) -> f64 {
        self.data[(i * self.width + j) * self.channels + c]
    }

    /// Channel `c` as a plane.
    pub fn channel(&self, c: usize) -> Plane {
        Plane::from_fn(self.height, self.width, |i, j| self.get(i, j, c))
    }

    /// Reassembles an image from per-channel planes, clamping to `[0, 1]`.
    pub fn from_planes(planes: &[Plane]) -> Result<Self> {
        let first = planes.first().ok_or_else(|| Error::Dimension("no channels".into()))?;
        let (h, w) = first.dims();
        if planes.iter().any(|p| p.dims() != (h, w)) {
            return Err(Error::Dimension("channel planes differ in size".into()));
        }
        Ok(Self::from_fn(h, w, planes.len(), |i, j, c| planes[c].get(i, j)))
    }

    /// Applies `f` to every stored value and clamps the result.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Image {
        Image {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v).clamp(0.0, 1.0)).collect(),
        }
    }

    pub fn same_dims(&self, other: &Image) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    pub fn hflip(&self) -> Image {
        Image::from_fn(self.height, self.width, self.channels, |i, j, c| {
            self.get(i, self.width - 1 - j, c)
        })
    }

    /// Mean over channels.
    pub fn luma(&self) -> Plane {
        Plane::from_fn(self.height, self.width, |i, j| {
            (0..self.channels).map(|c| self.get(i, j, c)).sum::<f64>() / self.channels as f64
        })
    }

    /// Quantizes to 8 bits per channel.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub fn from_u8(height: usize, width: usize, channels: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(
            height,
            width,
            channels,
            bytes.iter().map(|&b| b as f64 / 255.0).collect(),
        )
    }
}

/// 68 facial landmarks in pixel coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct LandmarkSet {
    points: Vec<Point>,
}

impl LandmarkSet {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.len() != LANDMARK_COUNT {
            return Err(Error::Domain(format!(
                "expected {LANDMARK_COUNT} landmarks, got {}",
                points.len()
            )));
        }
        if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::Domain("non-finite landmark coordinate".into()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Checks that every point lies inside a `height x width` image.
    pub fn check_bounds(&self, height: usize, width: usize) -> Result<()> {
        let max_x = width as f64 - 1.0;
        let max_y = height as f64 - 1.0;
        match self
            .points
            .iter()
            .position(|p| p.x < 0.0 || p.y < 0.0 || p.x > max_x || p.y > max_y)
        {
            Some(k) => Err(Error::Domain(format!(
                "landmark {k} at ({}, {}) outside {height}x{width} image",
                self.points[k].x, self.points[k].y
            ))),
            None => Ok(()),
        }
    }

    /// Mirror left-right inside an image of the given width. Point order is
    /// kept, so left/right semantic labels swap.
    pub fn hflip(&self, width: usize) -> LandmarkSet {
        let w = width as f64 - 1.0;
        LandmarkSet {
            points: self.points.iter().map(|p| Point::new(w - p.x, p.y)).collect(),
        }
    }
}

impl TryFrom<Vec<[f64; 2]>> for LandmarkSet {
    type Error = Error;
    fn try_from(raw: Vec<[f64; 2]>) -> Result<Self> {
        LandmarkSet::new(raw.into_iter().map(|[x, y]| Point::new(x, y)).collect())
    }
}

impl From<LandmarkSet> for Vec<[f64; 2]> {
    fn from(l: LandmarkSet) -> Self {
        l.points.iter().map(|p| [p.x, p.y]).collect()
    }
}

impl DerefMut for SoftMask {
    fn deref_mut(&mut self) -> &mut Plane {
        &mut self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_rejects_out_of_range() {
        assert!(Image::new(1, 1, 1, vec![1.5]).is_err());
        assert!(Image::new(1, 1, 1, vec![f64::NAN]).is_err());
        assert!(Image::new(1, 2, 1, vec![0.5]).is_err());
        assert!(Image::new(1, 1, 2, vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn soft_mask_rejects_out_of_range() {
        assert!(SoftMask::from_values(1, 2, vec![0.0, -0.1]).is_err());
        assert!(SoftMask::from_values(1, 2, vec![0.0, 1.0]).is_ok());
    }

    #[test]
    fn landmark_count_enforced() {
        let pts = vec![Point::new(1.0, 1.0); 67];
        assert!(LandmarkSet::new(pts).is_err());
    }

    #[test]
    fn landmark_bounds() {
        let mut pts = vec![Point::new(1.0, 1.0); 68];
        let l = LandmarkSet::new(pts.clone()).unwrap();
        assert!(l.check_bounds(4, 4).is_ok());
        pts[10] = Point::new(4.0, 1.0);
        let l = LandmarkSet::new(pts).unwrap();
        assert!(l.check_bounds(4, 4).is_err());
    }

    #[test]
    fn u8_round_trip_is_exact_on_grid() {
        let img = Image::from_fn(3, 3, 3, |i, j, c| ((i * 9 + j * 3 + c) as f64) / 255.0);
        let back = Image::from_u8(3, 3, 3, &img.to_u8()).unwrap();
        assert_eq!(img, back);
    }
}
