//! Metric reports and score files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{auc, average_precision, average_recall, mean_f1, DEFAULT_THRESHOLD};
use crate::{Error, Result};

/// The metrics JSON object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub auc: f64,
    pub ap: f64,
    pub ar: f64,
    pub mf1: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

impl MetricsReport {
    pub fn compute(scores: &[f64], labels: &[u8]) -> Result<Self> {
        Ok(Self {
            auc: auc(scores, labels)?,
            ap: average_precision(scores, labels)?,
            ar: average_recall(scores, labels, DEFAULT_THRESHOLD)?,
            mf1: mean_f1(scores, labels, DEFAULT_THRESHOLD)?,
            n_pos: labels.iter().filter(|&&l| l == 1).count(),
            n_neg: labels.iter().filter(|&&l| l == 0).count(),
        })
    }
}

/// One row of a scores CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub id: String,
    pub group: String,
    pub score: f64,
    pub label: u8,
}

pub fn write_scores(rows: &[ScoreRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    for row in rows {
        w.serialize(row).map_err(|e| Error::format(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<ScoreRow>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    r.deserialize()
        .enumerate()
        .map(|(k, row)| row.map_err(|e| Error::format(path, format!("row {}: {e}", k + 1))))
        .collect()
}

/// One bin of a quality-stratified AUC table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityBin {
    pub lo: f64,
    pub hi: f64,
    pub n_fake: usize,
    /// AUC of the fakes in this bin against every real sample.
    pub auc: Option<f64>,
}

/// Splits fakes into `bins` equal-width bins of their quality score over
/// `[lo, hi]` and computes each bin's AUC against all real samples. Reals
/// carry `quality = None`.
pub fn quality_binned_auc(
    scores: &[f64],
    labels: &[u8],
    quality: &[Option<f64>],
    bins: usize,
    (lo, hi): (f64, f64),
) -> Result<Vec<QualityBin>> {
    if scores.len() != labels.len() || scores.len() != quality.len() {
        return Err(Error::Dimension("scores, labels and qualities differ in length".into()));
    }
    if bins == 0 || !(hi > lo) {
        return Err(Error::Config("need at least one bin over a non-empty range".into()));
    }
    let width = (hi - lo) / bins as f64;
    let reals: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == 0)
        .map(|(&s, _)| s)
        .collect();
    (0..bins)
        .map(|b| {
            let (blo, bhi) = (lo + b as f64 * width, lo + (b + 1) as f64 * width);
            let fakes: Vec<f64> = scores
                .iter()
                .zip(labels)
                .zip(quality)
                .filter_map(|((&s, &l), q)| match q {
                    Some(q) if l == 1 && *q >= blo && (*q < bhi || (b + 1 == bins && *q <= bhi)) => Some(s),
                    _ => None,
                })
                .collect();
            let mut s = reals.clone();
            s.extend_from_slice(&fakes);
            let mut l = vec![0u8; reals.len()];
            l.extend(std::iter::repeat_n(1u8, fakes.len()));
            Ok(QualityBin {
                lo: blo,
                hi: bhi,
                n_fake: fakes.len(),
                auc: auc(&s, &l).ok(),
            })
        })
        .collect()
}

pub fn write_quality_bins(bins: &[QualityBin], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    for b in bins {
        w.serialize(b).map_err(|e| Error::format(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
