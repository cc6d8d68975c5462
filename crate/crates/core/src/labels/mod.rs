//! Explicit-attention ground truth derived from a blending mask: the
//! boundary map, its argmax ("vulnerable") pixels, adaptive Gaussian
//! heatmaps around those pixels, and self-consistency maps relative to one
//! anchor pixel.

mod persist;
mod radius;

use std::ops::Deref;

use crate::imaging::{Plane, SoftMask};
use crate::rng::SeedStream;
use crate::{Error, Result};

pub use persist::{
    decode_plane_blob, encode_plane_blob, read_plane_blob, read_plane_png16, write_plane_blob, write_plane_png16,
    PLANE_MAGIC,
};
pub use radius::gaussian_radius;

/// Default IoU threshold for the heatmap radius.
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.7;

/// Boundary values at or below this count as "outside the band" when
/// measuring the band extent through a point.
pub const BAND_EPSILON: f64 = 1e-6;

/// `4 m (1 - m)` per pixel; all zeros for a real image.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryMask(Plane);

/// Heatmap target with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap(Plane);

/// Self-consistency target relative to `anchor`; `anchor` is `None` for real
/// images.
#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyMap {
    plane: Plane,
    anchor: Option<(usize, usize)>,
}

/// Pixels attaining the global maximum of a boundary mask, in row-major order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VulnerablePointSet {
    points: Vec<(usize, usize)>,
}

macro_rules! plane_newtype {
    ($t:ty) => {
        impl Deref for $t {
            type Target = Plane;
            fn deref(&self) -> &Plane {
                &self.0
            }
        }

        impl $t {
            pub fn plane(&self) -> &Plane {
                &self.0
            }

            pub fn into_plane(self) -> Plane {
                self.0
            }

            pub fn hflip(&self) -> Self {
                Self(self.0.hflip())
            }
        }
    };
}

plane_newtype!(BoundaryMask);
plane_newtype!(Heatmap);

impl BoundaryMask {
    /// The all-zero boundary of a real image.
    pub fn real(height: usize, width: usize) -> Self {
        Self(Plane::zeros(height, width))
    }

    /// Wraps an arbitrary plane, checking the `[0, 1]` range.
    pub fn from_plane(plane: Plane) -> Result<Self> {
        if plane.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Domain("boundary values must lie in [0, 1]".into()));
        }
        Ok(Self(plane))
    }
}

impl Heatmap {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self(Plane::zeros(height, width))
    }

    pub fn from_plane(plane: Plane) -> Result<Self> {
        if plane.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Domain("heatmap values must lie in [0, 1]".into()));
        }
        Ok(Self(plane))
    }
}

impl ConsistencyMap {
    pub fn real(height: usize, width: usize) -> Self {
        Self {
            plane: Plane::filled(height, width, 1.0),
            anchor: None,
        }
    }

    pub fn anchor(&self) -> Option<(usize, usize)> {
        self.anchor
    }

    pub fn plane(&self) -> &Plane {
        &self.plane
    }

    pub fn into_plane(self) -> Plane {
        self.plane
    }

    pub fn hflip(&self) -> Self {
        let w = self.plane.width();
        Self {
            plane: self.plane.hflip(),
            anchor: self.anchor.map(|(i, j)| (i, w - 1 - j)),
        }
    }
}

impl Deref for ConsistencyMap {
    type Target = Plane;
    fn deref(&self) -> &Plane {
        &self.plane
    }
}

impl VulnerablePointSet {
    pub fn points(&self) -> &[(usize, usize)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, p: (usize, usize)) -> bool {
        self.points.binary_search(&p).is_ok()
    }

    /// Draws one point uniformly; `None` for an empty set.
    pub fn choose(&self, rng: &mut SeedStream) -> Option<(usize, usize)> {
        if self.points.is_empty() {
            None
        } else {
            Some(self.points[rng.below(self.points.len())])
        }
    }
}

/// Boundary mask `b = 4 m (1 - m)`.
///
/// The product is evaluated on the half of the pair `(m, 1 - m)` that is
/// at least one half, which is exact to compute from either side, so `m` and
/// `1 - m` produce bitwise-identical boundaries.
pub fn boundary_mask(mask: &SoftMask) -> BoundaryMask {
    BoundaryMask(mask.plane().map(|m| {
        let hi = if m >= 0.5 { m } else { 1.0 - m };
        4.0 * hi * (1.0 - hi)
    }))
}

/// All pixels where the boundary equals its maximum (exact comparison).
/// Empty when the maximum is zero.
pub fn vulnerable_points(boundary: &BoundaryMask) -> VulnerablePointSet {
    let peak = boundary.max();
    if !(peak > 0.0) {
        return VulnerablePointSet::default();
    }
    let w = boundary.width();
    let points = boundary
        .data()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v == peak)
        .map(|(k, _)| (k / w, k % w))
        .collect();
    VulnerablePointSet { points }
}

/// Height and width of the positive band through `(i, j)`: the lengths of the
/// vertical and horizontal runs of values above [`BAND_EPSILON`] containing it.
pub fn band_extent(boundary: &BoundaryMask, (i, j): (usize, usize)) -> (usize, usize) {
    let (h, w) = boundary.dims();
    let pos = |a: usize, b: usize| boundary.get(a, b) > BAND_EPSILON;
    if !pos(i, j) {
        return (0, 0);
    }
    let up = (0..i).rev().take_while(|&a| pos(a, j)).count();
    let down = (i + 1..h).take_while(|&a| pos(a, j)).count();
    let left = (0..j).rev().take_while(|&b| pos(i, b)).count();
    let right = (j + 1..w).take_while(|&b| pos(i, b)).count();
    (up + down + 1, left + right + 1)
}

/// Gaussian width for one vulnerable point: the radius of the IoU-tolerant
/// neighbourhood of the band box through the point, floored at one pixel,
/// divided by three.
pub fn point_sigma(boundary: &BoundaryMask, p: (usize, usize), iou_threshold: f64) -> Result<f64> {
    let (bh, bw) = band_extent(boundary, p);
    let r = if bh == 0 || bw == 0 {
        1.0
    } else {
        gaussian_radius(bh as f64, bw as f64, iou_threshold)?.max(1.0)
    };
    Ok(r / 3.0)
}

/// Heatmap ground truth: per pixel, the maximum over vulnerable points of an
/// unnormalized Gaussian `exp(-d^2 / (2 sigma_k^2))` centred on the point.
pub fn heatmap_gt(points: &VulnerablePointSet, boundary: &BoundaryMask, iou_threshold: f64) -> Result<Heatmap> {
    let (h, w) = boundary.dims();
    if points.is_empty() {
        return Ok(Heatmap::zeros(h, w));
    }
    let mut centres = Vec::with_capacity(points.len());
    for &p in points.points() {
        let s = point_sigma(boundary, p, iou_threshold)?;
        centres.push((p.0 as f64, p.1 as f64, 1.0 / (2.0 * s * s)));
    }
    // exp is monotone, so the max of the Gaussians is exp of the min exponent
    let plane = Plane::from_fn(h, w, |i, j| {
        let (fi, fj) = (i as f64, j as f64);
        let e = centres.iter().fold(f64::INFINITY, |acc, &(ci, cj, k)| {
            let di = fi - ci;
            let dj = fj - cj;
            acc.min((di * di + dj * dj) * k)
        });
        (-e).exp()
    });
    Ok(Heatmap(plane))
}

/// Self-consistency ground truth `c = 1 - |b(anchor) - b|`; all ones for a
/// real image. For a fake the anchor must be a vulnerable point.
pub fn consistency_gt(
    boundary: &BoundaryMask,
    anchor: Option<(usize, usize)>,
    is_real: bool,
) -> Result<ConsistencyMap> {
    let (h, w) = boundary.dims();
    if is_real {
        return Ok(ConsistencyMap::real(h, w));
    }
    let anchor = anchor.ok_or_else(|| Error::Contract("fake sample needs an anchor".into()))?;
    if anchor.0 >= h || anchor.1 >= w {
        return Err(Error::Contract(format!("anchor {anchor:?} outside {h}x{w}")));
    }
    let b_uv = boundary.get(anchor.0, anchor.1);
    let peak = boundary.max();
    if !(b_uv > 0.0) || b_uv != peak {
        return Err(Error::Contract(format!(
            "anchor {anchor:?} (b = {b_uv}) is not a vulnerable point (max = {peak})"
        )));
    }
    Ok(ConsistencyMap {
        plane: boundary.map(|b| 1.0 - (b_uv - b).abs()),
        anchor: Some(anchor),
    })
}
