//! On-disk layout of one ground-truth bundle: `image.png`, one plane blob per
//! label map and a `bundle.json` with the label and vulnerable points.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sample::{GroundTruthBundle, Recipe};
use crate::imaging::{Image, Plane};
use crate::labels::{read_plane_blob, write_plane_blob};
use crate::{Error, Result};

pub const BUNDLE_FILES: [&str; 6] = [
    "image.png",
    "mask.plane",
    "boundary.plane",
    "heatmap.plane",
    "consistency.plane",
    "bundle.json",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub label: u8,
    pub recipe: Option<Recipe>,
    pub seed: Option<u64>,
    pub source: Option<String>,
    pub height: usize,
    pub width: usize,
    /// Vulnerable points as `[row, col]`.
    pub points: Vec<[usize; 2]>,
    pub anchor: Option<[usize; 2]>,
}

/// A bundle as read back from disk.
#[derive(Clone, Debug, PartialEq)]
pub struct StoredBundle {
    pub image: Image,
    pub mask: Plane,
    pub boundary: Plane,
    pub heatmap: Plane,
    pub consistency: Plane,
    pub meta: BundleMeta,
}

pub fn write_bundle(
    bundle: &GroundTruthBundle,
    recipe: Option<Recipe>,
    seed: Option<u64>,
    source: Option<String>,
    dir: impl AsRef<Path>,
) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    bundle.image.write_png(dir.join("image.png"))?;
    write_plane_blob(bundle.mask.plane(), dir.join("mask.plane"))?;
    write_plane_blob(bundle.boundary.plane(), dir.join("boundary.plane"))?;
    write_plane_blob(bundle.heatmap.plane(), dir.join("heatmap.plane"))?;
    write_plane_blob(bundle.consistency.plane(), dir.join("consistency.plane"))?;
    let (height, width) = bundle.dims();
    let meta = BundleMeta {
        label: bundle.label,
        recipe,
        seed,
        source,
        height,
        width,
        points: bundle.points.points().iter().map(|&(i, j)| [i, j]).collect(),
        anchor: bundle.consistency.anchor().map(|(i, j)| [i, j]),
    };
    let path = dir.join("bundle.json");
    fs::write(&path, serde_json::to_string_pretty(&meta)? + "\n").map_err(|e| Error::io(&path, e))
}

pub fn read_bundle(dir: impl AsRef<Path>) -> Result<StoredBundle> {
    let dir = dir.as_ref();
    let path = dir.join("bundle.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let meta: BundleMeta = serde_json::from_str(&text)?;
    let image = Image::read(dir.join("image.png"))?;
    let read = |name: &str| -> Result<Plane> {
        let p = read_plane_blob(dir.join(name))?;
        if p.dims() != (meta.height, meta.width) {
            return Err(Error::format(dir.join(name), "size disagrees with bundle.json"));
        }
        Ok(p)
    };
    let stored = StoredBundle {
        mask: read("mask.plane")?,
        boundary: read("boundary.plane")?,
        heatmap: read("heatmap.plane")?,
        consistency: read("consistency.plane")?,
        image,
        meta,
    };
    if (stored.image.height(), stored.image.width()) != (stored.meta.height, stored.meta.width) {
        return Err(Error::format(dir.join("image.png"), "size disagrees with bundle.json"));
    }
    Ok(stored)
}
