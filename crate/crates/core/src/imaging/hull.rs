use serde::{Deserialize, Serialize};

use super::{Plane, SoftMask};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Convex hull by Andrew's monotone chain, counter-clockwise in a y-up frame,
/// with collinear points dropped.
pub fn convex_hull(points: &[Point]) -> Result<Vec<Point>> {
    if points.len() < 3 {
        return Err(Error::DegenerateGeometry(format!(
            "need at least 3 points for a hull, got {}",
            points.len()
        )));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();

    let mut lower: Vec<Point> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::with_capacity(pts.len());
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);

    if lower.len() < 3 {
        return Err(Error::DegenerateGeometry("points are collinear".into()));
    }
    Ok(lower)
}

/// Binary mask of the convex hull of `points`, sampled at pixel centers
/// `(x = column, y = row)`. Pixels whose center lies on a hull edge count as
/// inside.
pub fn convex_hull_mask(points: &[Point], height: usize, width: usize) -> Result<SoftMask> {
    let hull = convex_hull(points)?;
    let scale = hull.iter().map(|p| p.x.abs().max(p.y.abs())).fold(1.0, f64::max);
    let eps = 1e-9 * scale * scale;

    let edges: Vec<(Point, Point)> = hull
        .iter()
        .enumerate()
        .map(|(k, &a)| (a, hull[(k + 1) % hull.len()]))
        .collect();
    let (min_y, max_y) = hull.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        (lo.min(p.y), hi.max(p.y))
    });
    let (min_x, max_x) = hull.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        (lo.min(p.x), hi.max(p.x))
    });

    let plane = Plane::from_fn(height, width, |i, j| {
        let p = Point::new(j as f64, i as f64);
        if p.x < min_x - 1e-9 || p.x > max_x + 1e-9 || p.y < min_y - 1e-9 || p.y > max_y + 1e-9 {
            return 0.0;
        }
        let inside = edges.iter().all(|&(a, b)| cross(a, b, p) >= -eps);
        if inside {
            1.0
        } else {
            0.0
        }
    });
    Ok(SoftMask::from_plane_unchecked(plane))
}
