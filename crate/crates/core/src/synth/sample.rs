use serde::{Deserialize, Serialize};

use crate::imaging::filter::{sample_bilinear, Edge};
use crate::imaging::{self, blend, convex_hull_mask, deform_mask, DeformParams, Image, LandmarkSet, Plane, SoftMask};
use crate::labels::{
    boundary_mask, consistency_gt, heatmap_gt, vulnerable_points, BoundaryMask, ConsistencyMap, Heatmap,
    VulnerablePointSet, DEFAULT_IOU_THRESHOLD,
};
use crate::rng::SeedStream;
use crate::{Error, Result};

use super::manifest::FaceStore;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Recipe {
    Real,
    Bi,
    Sbi,
}

impl Recipe {
    pub fn label(self) -> u8 {
        match self {
            Recipe::Real => 0,
            _ => 1,
        }
    }
}

/// One manifest line: everything needed to regenerate a training sample.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub image_path: String,
    pub landmark_path: String,
    pub recipe: Recipe,
    #[serde(default)]
    pub partner_path: Option<String>,
    pub seed: u64,
    pub label: u8,
}

impl SampleRecord {
    pub fn validate(&self) -> Result<()> {
        if self.recipe == Recipe::Bi && self.partner_path.is_none() {
            return Err(Error::Contract(format!("bi record {} has no partner", self.image_path)));
        }
        if self.label != self.recipe.label() {
            return Err(Error::Contract(format!(
                "record {} has label {} but recipe {:?}",
                self.image_path, self.label, self.recipe
            )));
        }
        Ok(())
    }
}

/// Photometric and geometric jitter for one view of an SBI pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewJitter {
    /// Per-channel additive shift drawn from `± color`.
    pub color: f64,
    /// Contrast factor drawn from `1 ± contrast` around the image mean.
    pub contrast: f64,
    /// Zoom factor drawn from `1 ± scale` about the centre.
    pub scale: f64,
    /// Translation drawn from `± translate` pixels on each axis.
    pub translate: f64,
}

impl ViewJitter {
    pub fn none() -> Self {
        Self {
            color: 0.0,
            contrast: 0.0,
            scale: 0.0,
            translate: 0.0,
        }
    }

    pub fn is_none(&self) -> bool {
        self.color == 0.0 && self.contrast == 0.0 && self.scale == 0.0 && self.translate == 0.0
    }

    pub fn apply(&self, image: &Image, rng: &mut SeedStream) -> Image {
        if self.is_none() {
            return image.clone();
        }
        let shifts: Vec<f64> = (0..image.channels())
            .map(|_| rng.range(-self.color, self.color))
            .collect();
        let contrast = 1.0 + rng.range(-self.contrast, self.contrast);
        let zoom = 1.0 + rng.range(-self.scale, self.scale);
        let ty = rng.range(-self.translate, self.translate);
        let tx = rng.range(-self.translate, self.translate);

        let (h, w) = (image.height(), image.width());
        let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
        let planes: Vec<Plane> = (0..image.channels())
            .map(|c| {
                let src = image.channel(c);
                let mean = src.mean();
                Plane::from_fn(h, w, |i, j| {
                    let v = if zoom == 1.0 && ty == 0.0 && tx == 0.0 {
                        src.get(i, j)
                    } else {
                        let sy = (i as f64 - cy - ty) / zoom + cy;
                        let sx = (j as f64 - cx - tx) / zoom + cx;
                        sample_bilinear(&src, sy, sx, Edge::Clamp)
                    };
                    mean + (v - mean) * contrast + shifts[c]
                })
            })
            .collect();
        Image::from_planes(&planes).expect("planes share dims")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Square side that every image is resized to before synthesis.
    pub size: usize,
    pub deform: DeformParams,
    /// The deformed mask is scaled by a factor drawn uniformly from this list.
    pub blend_ratios: Vec<f64>,
    pub source_jitter: ViewJitter,
    pub target_jitter: ViewJitter,
    pub iou_threshold: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            size: 384,
            deform: DeformParams::default(),
            blend_ratios: vec![0.5],
            source_jitter: ViewJitter {
                color: 0.3,
                contrast: 0.4,
                scale: 0.08,
                translate: 3.0,
            },
            target_jitter: ViewJitter::none(),
            iou_threshold: DEFAULT_IOU_THRESHOLD,
        }
    }
}

impl SynthConfig {
    /// A configuration whose SBI output equals its input image.
    pub fn zero_jitter(size: usize) -> Self {
        Self {
            size,
            source_jitter: ViewJitter::none(),
            target_jitter: ViewJitter::none(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::Config("image size must be positive".into()));
        }
        if self.blend_ratios.is_empty() || self.blend_ratios.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
            return Err(Error::Config("blend ratios must be a non-empty list in (0, 1]".into()));
        }
        if !(self.iou_threshold > 0.0 && self.iou_threshold < 1.0) {
            return Err(Error::Config("IoU threshold must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Everything the three branches train against for one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruthBundle {
    pub image: Image,
    pub mask: SoftMask,
    pub boundary: BoundaryMask,
    pub points: VulnerablePointSet,
    pub heatmap: Heatmap,
    pub consistency: ConsistencyMap,
    pub label: u8,
}

impl GroundTruthBundle {
    /// Derives boundary, vulnerable points, heatmap and consistency from a
    /// blending mask. Real samples (`label == 0`) get the zero boundary
    /// regardless of `mask`. The consistency anchor is drawn from `rng`.
    pub fn from_mask(
        image: Image,
        mask: SoftMask,
        label: u8,
        iou_threshold: f64,
        rng: &mut SeedStream,
    ) -> Result<Self> {
        if mask.dims() != (image.height(), image.width()) {
            return Err(Error::Dimension("mask and image sizes differ".into()));
        }
        let (h, w) = mask.dims();
        let (mask, boundary) = if label == 0 {
            (SoftMask::zeros(h, w), BoundaryMask::real(h, w))
        } else {
            let b = boundary_mask(&mask);
            (mask, b)
        };
        let points = vulnerable_points(&boundary);
        let heatmap = heatmap_gt(&points, &boundary, iou_threshold)?;
        let consistency = if label == 0 {
            ConsistencyMap::real(h, w)
        } else {
            let anchor = points
                .choose(rng)
                .ok_or_else(|| Error::DegenerateGeometry("blend mask has no boundary band".into()))?;
            consistency_gt(&boundary, Some(anchor), false)?
        };
        Ok(Self {
            image,
            mask,
            boundary,
            points,
            heatmap,
            consistency,
            label,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.image.height(), self.image.width())
    }

    /// Label maps regenerated from the mask box-downsampled by `factor`;
    /// returns `(heatmap, consistency, points)` at the reduced size.
    pub fn targets_at(
        &self,
        factor: usize,
        iou_threshold: f64,
        rng: &mut SeedStream,
    ) -> Result<(Heatmap, ConsistencyMap, VulnerablePointSet)> {
        let small = self.mask.downsample(factor)?;
        let (h, w) = small.dims();
        if self.label == 0 {
            return Ok((
                Heatmap::zeros(h, w),
                ConsistencyMap::real(h, w),
                VulnerablePointSet::default(),
            ));
        }
        let boundary = boundary_mask(&small);
        let points = vulnerable_points(&boundary);
        let heatmap = heatmap_gt(&points, &boundary, iou_threshold)?;
        let anchor = points
            .choose(rng)
            .ok_or_else(|| Error::DegenerateGeometry("downsampled mask has no boundary band".into()))?;
        let consistency = consistency_gt(&boundary, Some(anchor), false)?;
        Ok((heatmap, consistency, points))
    }

    /// Mirrors every component left-right.
    pub fn hflip(&self) -> GroundTruthBundle {
        GroundTruthBundle {
            image: self.image.hflip(),
            mask: self.mask.hflip(),
            boundary: self.boundary.hflip(),
            points: vulnerable_points(&self.boundary.hflip()),
            heatmap: self.heatmap.hflip(),
            consistency: self.consistency.hflip(),
            label: self.label,
        }
    }
}

fn fit(image: &Image, landmarks: &LandmarkSet, size: usize) -> Result<(Image, LandmarkSet)> {
    if image.height() == size && image.width() == size {
        landmarks.check_bounds(size, size)?;
        return Ok((image.clone(), landmarks.clone()));
    }
    let sy = size as f64 / image.height() as f64;
    let sx = size as f64 / image.width() as f64;
    let resized = imaging::filter::resize_image(image, size, size);
    let max = size as f64 - 1.0;
    let pts = landmarks
        .points()
        .iter()
        .map(|p| {
            imaging::Point::new(
                ((p.x + 0.5) * sx - 0.5).clamp(0.0, max),
                ((p.y + 0.5) * sy - 0.5).clamp(0.0, max),
            )
        })
        .collect();
    Ok((resized, LandmarkSet::new(pts)?))
}

fn blend_mask(landmarks: &LandmarkSet, size: usize, config: &SynthConfig, rng: &SeedStream) -> Result<SoftMask> {
    let hull = convex_hull_mask(landmarks.points(), size, size)?;
    let deformed = deform_mask(&hull, &config.deform, &mut rng.fork("deform"));
    let ratio = config.blend_ratios[rng.fork("ratio").below(config.blend_ratios.len())];
    deformed.scaled(ratio)
}

/// Real sample: image resized, zero boundary, zero heatmap, all-ones consistency.
pub fn make_real_sample(image: &Image, landmarks: &LandmarkSet, config: &SynthConfig) -> Result<GroundTruthBundle> {
    let (image, _) = fit(image, landmarks, config.size)?;
    let (h, w) = (image.height(), image.width());
    GroundTruthBundle::from_mask(
        image,
        SoftMask::zeros(h, w),
        0,
        config.iou_threshold,
        &mut SeedStream::new(0),
    )
}

/// Cross-image pseudo-fake: the foreground face is pasted onto the background
/// through a deformed hull of the foreground landmarks.
pub fn make_bi_sample(
    foreground: (&Image, &LandmarkSet),
    background: (&Image, &LandmarkSet),
    seed: u64,
    config: &SynthConfig,
) -> Result<GroundTruthBundle> {
    config.validate()?;
    let rng = SeedStream::new(seed);
    let (fg, fg_lm) = fit(foreground.0, foreground.1, config.size)?;
    let (bg, _) = fit(background.0, background.1, config.size)?;
    if fg.channels() != bg.channels() {
        return Err(Error::Dimension(
            "foreground and background channel counts differ".into(),
        ));
    }
    let mask = blend_mask(&fg_lm, config.size, config, &rng)?;
    let blended = blend(&fg, &bg, &mask)?;
    GroundTruthBundle::from_mask(blended, mask, 1, config.iou_threshold, &mut rng.fork("anchor"))
}

/// Self-blended pseudo-fake: two independently jittered views of the same
/// face are blended through a deformed hull of its landmarks.
pub fn make_sbi_sample(
    image: &Image,
    landmarks: &LandmarkSet,
    seed: u64,
    config: &SynthConfig,
) -> Result<GroundTruthBundle> {
    config.validate()?;
    let rng = SeedStream::new(seed);
    let (img, lm) = fit(image, landmarks, config.size)?;
    let source = config.source_jitter.apply(&img, &mut rng.fork("source"));
    let target = config.target_jitter.apply(&img, &mut rng.fork("target"));
    let mask = blend_mask(&lm, config.size, config, &rng)?;
    let blended = blend(&source, &target, &mask)?;
    GroundTruthBundle::from_mask(blended, mask, 1, config.iou_threshold, &mut rng.fork("anchor"))
}

/// Regenerates the bundle described by `record` from faces held in `store`.
pub fn materialize(record: &SampleRecord, store: &FaceStore, config: &SynthConfig) -> Result<GroundTruthBundle> {
    record.validate()?;
    let face = store.get(&record.image_path)?;
    match record.recipe {
        Recipe::Real => make_real_sample(&face.image, &face.landmarks, config),
        Recipe::Sbi => make_sbi_sample(&face.image, &face.landmarks, record.seed, config),
        Recipe::Bi => {
            let partner = store.get(record.partner_path.as_deref().expect("validated"))?;
            make_bi_sample(
                (&face.image, &face.landmarks),
                (&partner.image, &partner.landmarks),
                record.seed,
                config,
            )
        }
    }
}
