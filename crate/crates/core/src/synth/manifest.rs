use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::sample::{Recipe, SampleRecord};
use crate::imaging::{read_landmarks, Image, LandmarkSet};
use crate::rng::{mix, SeedStream};
use crate::{Error, Result};

/// Relative proportions of the three recipes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecipeMix {
    pub real: f64,
    pub bi: f64,
    pub sbi: f64,
}

impl RecipeMix {
    /// Exact per-recipe counts for `n` records by largest remainder.
    pub fn counts(&self, n: usize) -> Result<[usize; 3]> {
        let w = [self.real, self.bi, self.sbi];
        if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config("recipe weights must be finite and non-negative".into()));
        }
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            return Err(Error::Config("recipe weights sum to zero".into()));
        }
        let quotas: Vec<f64> = w.iter().map(|v| v / total * n as f64).collect();
        let mut counts = [0usize; 3];
        for k in 0..3 {
            counts[k] = quotas[k].floor() as usize;
        }
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| {
            let ra = quotas[a] - quotas[a].floor();
            let rb = quotas[b] - quotas[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        let mut left = n - counts.iter().sum::<usize>();
        for &k in order.iter().cycle() {
            if left == 0 {
                break;
            }
            if w[k] > 0.0 {
                counts[k] += 1;
                left -= 1;
            }
        }
        Ok(counts)
    }
}

impl FromStr for RecipeMix {
    type Err = Error;

    /// Parses `real:0.5,sbi:0.5`; omitted recipes get weight zero.
    fn from_str(s: &str) -> Result<Self> {
        let mut mix = RecipeMix {
            real: 0.0,
            bi: 0.0,
            sbi: 0.0,
        };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, value) = part
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("mix entry '{part}' is not name:weight")))?;
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("mix weight '{value}' is not a number")))?;
            match name.trim() {
                "real" => mix.real = v,
                "bi" => mix.bi = v,
                "sbi" => mix.sbi = v,
                other => return Err(Error::Config(format!("unknown recipe '{other}'"))),
            }
        }
        Ok(mix)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Excluded {
    pub image_path: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestReport {
    pub records: Vec<SampleRecord>,
    pub excluded: Vec<Excluded>,
}

const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg", "bmp"];

fn find_landmarks(landmark_dir: &Path, stem: &str) -> Option<PathBuf> {
    ["json", "csv"]
        .iter()
        .map(|ext| landmark_dir.join(format!("{stem}.{ext}")))
        .find(|p| p.is_file())
}

/// Scans `real_dir` for images, pairs each with `<stem>.json` or `<stem>.csv`
/// in `landmark_dir`, assigns recipes in the exact proportions of `mix`, and
/// returns a shuffled manifest. Images without landmarks are excluded and
/// reported. Output depends only on the directory listing and `master_seed`.
pub fn build_manifest(
    real_dir: &Path,
    landmark_dir: &Path,
    mix_weights: &RecipeMix,
    master_seed: u64,
) -> Result<ManifestReport> {
    let entries = fs::read_dir(real_dir).map_err(|e| Error::io(real_dir, e))?;
    let mut images: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(real_dir, e))?.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
            .unwrap_or(false);
        if path.is_file() && is_image {
            images.push(path);
        }
    }
    images.sort();
    if images.is_empty() {
        return Err(Error::EmptyInput(format!("no images in {}", real_dir.display())));
    }

    let mut usable: Vec<(String, String)> = Vec::new();
    let mut excluded = Vec::new();
    for path in &images {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        match find_landmarks(landmark_dir, stem) {
            Some(lm) => usable.push((path.to_string_lossy().into_owned(), lm.to_string_lossy().into_owned())),
            None => excluded.push(Excluded {
                image_path: path.to_string_lossy().into_owned(),
                reason: format!("no {stem}.json or {stem}.csv in {}", landmark_dir.display()),
            }),
        }
    }
    if usable.is_empty() {
        return Err(Error::EmptyInput("no image has landmarks".into()));
    }

    let n = usable.len();
    let [n_real, n_bi, n_sbi] = mix_weights.counts(n)?;
    if n_bi > 0 && n < 2 {
        return Err(Error::Config("bi recipe needs at least two images".into()));
    }
    let mut recipes: Vec<Recipe> = std::iter::repeat_n(Recipe::Real, n_real)
        .chain(std::iter::repeat_n(Recipe::Bi, n_bi))
        .chain(std::iter::repeat_n(Recipe::Sbi, n_sbi))
        .collect();
    let master = SeedStream::new(master_seed);
    master.split(0).shuffle(&mut recipes);

    let mut records: Vec<SampleRecord> = usable
        .iter()
        .zip(&recipes)
        .enumerate()
        .map(|(k, ((image_path, landmark_path), &recipe))| {
            let seed = mix(master_seed, k as u64);
            let partner_path = (recipe == Recipe::Bi).then(|| {
                let mut pick = SeedStream::new(seed).fork("partner").below(n - 1);
                if pick >= k {
                    pick += 1;
                }
                usable[pick].0.clone()
            });
            SampleRecord {
                image_path: image_path.clone(),
                landmark_path: landmark_path.clone(),
                recipe,
                partner_path,
                seed,
                label: recipe.label(),
            }
        })
        .collect();
    master.split(1).shuffle(&mut records);
    Ok(ManifestReport { records, excluded })
}

/// Writes one JSON object per line.
pub fn write_manifest(records: &[SampleRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<SampleRecord>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SampleRecord =
            serde_json::from_str(&line).map_err(|e| Error::format(path, format!("line {}: {e}", k + 1)))?;
        record
            .validate()
            .map_err(|e| Error::format(path, format!("line {}: {e}", k + 1)))?;
        records.push(record);
    }
    Ok(records)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    pub image: Image,
    pub landmarks: LandmarkSet,
}

/// Decoded faces keyed by image path.
#[derive(Clone, Debug, Default)]
pub struct FaceStore {
    faces: HashMap<String, Face>,
}

impl FaceStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, image_path: impl Into<String>, image: Image, landmarks: LandmarkSet) {
        self.faces.insert(image_path.into(), Face { image, landmarks });
    }

    pub fn get(&self, image_path: &str) -> Result<&Face> {
        self.faces
            .get(image_path)
            .ok_or_else(|| Error::Contract(format!("face {image_path} not loaded")))
    }

    pub fn len(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    /// Reads every image referenced by `records`, including BI partners.
    /// A partner's landmarks come from the record whose image it is.
    pub fn load(records: &[SampleRecord]) -> Result<Self> {
        let mut landmark_of: BTreeMap<&str, &str> = BTreeMap::new();
        for r in records {
            landmark_of.insert(&r.image_path, &r.landmark_path);
        }
        for r in records {
            if let Some(p) = &r.partner_path {
                if !landmark_of.contains_key(p.as_str()) {
                    return Err(Error::Contract(format!(
                        "partner {p} of {} has no record of its own to take landmarks from",
                        r.image_path
                    )));
                }
            }
        }
        let mut store = FaceStore::new();
        for (image_path, landmark_path) in landmark_of {
            let image = Image::read(image_path)?;
            let landmarks = read_landmarks(landmark_path)?;
            landmarks
                .check_bounds(image.height(), image.width())
                .map_err(|e| Error::format(landmark_path, e.to_string()))?;
            store.insert(image_path, image, landmarks);
        }
        Ok(store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_exact() {
        let mix = RecipeMix {
            real: 0.5,
            bi: 0.0,
            sbi: 0.5,
        };
        assert_eq!(mix.counts(100).unwrap(), [50, 0, 50]);
        assert_eq!(mix.counts(101).unwrap().iter().sum::<usize>(), 101);
        let thirds: RecipeMix = "real:1,bi:1,sbi:1".parse().unwrap();
        assert_eq!(thirds.counts(10).unwrap().iter().sum::<usize>(), 10);
    }

    #[test]
    fn mix_parse_errors() {
        assert!("real=1".parse::<RecipeMix>().is_err());
        assert!("fake:1".parse::<RecipeMix>().is_err());
        assert!("real:x".parse::<RecipeMix>().is_err());
        let zero: RecipeMix = "real:0".parse().unwrap();
        assert!(zero.counts(3).is_err());
    }
}
