//! Ranking and thresholded classification metrics.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::{Error, Result};

/// Operating threshold for the thresholded metrics.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

fn check(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Domain(format!("non-finite score {s}")));
    }
    if let Some(l) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Domain(format!("label {l} is not 0 or 1")));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "need both classes, got {n_pos} positives and {n_neg} negatives"
        )));
    }
    Ok((n_pos, n_neg))
}

/// Indices sorted by descending score; ties keep input order.
fn descending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    idx
}

/// Consecutive runs of equal scores in `order`.
fn tie_blocks<'a>(scores: &'a [f64], order: &'a [usize]) -> impl Iterator<Item = &'a [usize]> {
    order.chunk_by(move |&a, &b| scores[a] == scores[b])
}

/// Area under the ROC curve as the Mann-Whitney statistic, ties counting 1/2.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (n_pos, n_neg) = check(scores, labels)?;
    let order = descending(scores);
    // twice the number of (positive, negative) pairs ranked correctly,
    // kept as an integer so that the result is exact
    let mut doubled: u128 = 0;
    let mut neg_below = n_neg as u128;
    for block in tie_blocks(scores, &order) {
        let pos = block.iter().filter(|&&k| labels[k] == 1).count() as u128;
        let neg = block.len() as u128 - pos;
        neg_below -= neg;
        doubled += pos * (2 * neg_below + neg);
    }
    Ok(doubled as f64 / (2.0 * n_pos as f64 * n_neg as f64))
}

/// Average precision: the sum over score thresholds of the recall increment
/// times the precision, with every tied block forming a single threshold.
pub fn average_precision(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (n_pos, _) = check(scores, labels)?;
    let order = descending(scores);
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut ap = 0.0;
    for block in tie_blocks(scores, &order) {
        let pos = block.iter().filter(|&&k| labels[k] == 1).count();
        tp += pos;
        seen += block.len();
        if pos > 0 {
            ap += (pos as f64 / n_pos as f64) * (tp as f64 / seen as f64);
        }
    }
    Ok(ap)
}

/// Confusion counts with "fake" predicted when `score >= threshold`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

pub fn confusion(scores: &[f64], labels: &[u8], threshold: f64) -> Result<Confusion> {
    check(scores, labels)?;
    let mut c = Confusion::default();
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Class-averaged recall at `threshold`.
pub fn average_recall(scores: &[f64], labels: &[u8], threshold: f64) -> Result<f64> {
    let c = confusion(scores, labels, threshold)?;
    Ok(0.5 * (ratio(c.tp, c.tp + c.fn_) + ratio(c.tn, c.tn + c.fp)))
}

/// Class-averaged F1 at `threshold`; a class that is never predicted scores 0.
pub fn mean_f1(scores: &[f64], labels: &[u8], threshold: f64) -> Result<f64> {
    let c = confusion(scores, labels, threshold)?;
    let f1 = |tp: usize, fp: usize, fn_: usize| ratio(2 * tp, 2 * tp + fp + fn_);
    Ok(0.5 * (f1(c.tp, c.fp, c.fn_) + f1(c.tn, c.fn_, c.fp)))
}

/// Video score: the arithmetic mean of its frame scores.
pub fn video_score(frame_scores: &[f64]) -> Result<f64> {
    if frame_scores.is_empty() {
        return Err(Error::EmptyInput("video has no frame scores".into()));
    }
    Ok(frame_scores.iter().sum::<f64>() / frame_scores.len() as f64)
}

/// Aggregates frame scores per group id. Groups come back in sorted order;
/// every frame of a group must carry the same label.
pub fn group_scores(groups: &[String], scores: &[f64], labels: &[u8]) -> Result<(Vec<String>, Vec<f64>, Vec<u8>)> {
    if groups.len() != scores.len() || scores.len() != labels.len() {
        return Err(Error::Dimension("groups, scores and labels differ in length".into()));
    }
    let mut by_group: BTreeMap<&str, (Vec<f64>, u8)> = BTreeMap::new();
    for ((g, &s), &l) in groups.iter().zip(scores).zip(labels) {
        let entry = by_group.entry(g.as_str()).or_insert((Vec::new(), l));
        if entry.1 != l {
            return Err(Error::Contract(format!("group {g} mixes labels")));
        }
        entry.0.push(s);
    }
    let mut names = Vec::with_capacity(by_group.len());
    let mut out_scores = Vec::with_capacity(by_group.len());
    let mut out_labels = Vec::with_capacity(by_group.len());
    for (g, (frames, l)) in by_group {
        names.push(g.to_string());
        out_scores.push(video_score(&frames)?);
        out_labels.push(l);
    }
    Ok((names, out_scores, out_labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;

    fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &si) in scores.iter().enumerate() {
            for (j, &sj) in scores.iter().enumerate() {
                if labels[i] == 1 && labels[j] == 0 {
                    den += 1.0;
                    num += if si > sj {
                        1.0
                    } else if si == sj {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        num / den
    }

    #[test]
    fn auc_cases() {
        assert_eq!(auc(&[0.9, 0.8, 0.1, 0.2], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(auc(&[0.3; 6], &[1, 0, 1, 0, 0, 1]).unwrap(), 0.5);
        assert!(matches!(auc(&[0.1, 0.2], &[1, 1]), Err(Error::UndefinedMetric(_))));
        let mut rng = SeedStream::new(1);
        for _ in 0..50 {
            let n = 2 + rng.below(40);
            let scores: Vec<f64> = (0..n).map(|_| (rng.below(6) as f64) / 5.0).collect();
            let mut labels: Vec<u8> = (0..n).map(|_| rng.below(2) as u8).collect();
            labels[0] = 0;
            labels[1] = 1;
            assert_eq!(auc(&scores, &labels).unwrap(), pairwise_auc(&scores, &labels));
        }
    }

    #[test]
    fn auc_rank_invariance() {
        let scores = [0.1, 0.7, 0.3, 0.3, 0.9, 0.2];
        let labels = [0, 1, 1, 0, 1, 0];
        let t: Vec<f64> = scores.iter().map(|s: &f64| (3.0 * s).exp()).collect();
        assert_eq!(auc(&scores, &labels).unwrap(), auc(&t, &labels).unwrap());
    }

    #[test]
    fn ap_cases() {
        assert_eq!(average_precision(&[0.9, 0.8, 0.1, 0.2], &[1, 1, 0, 0]).unwrap(), 1.0);
        // constant scores give the prevalence
        assert_eq!(average_precision(&[0.5; 4], &[1, 0, 0, 0]).unwrap(), 0.25);
        // ranks: + - + -, precision 1 at recall 0.5 then 2/3 at recall 1
        let ap = average_precision(&[0.9, 0.8, 0.7, 0.6], &[1, 0, 1, 0]).unwrap();
        assert!((ap - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn thresholded_metrics() {
        let s = [0.9, 0.6, 0.2, 0.4];
        let l = [1, 1, 0, 0];
        assert_eq!(average_recall(&s, &l, 0.5).unwrap(), 1.0);
        assert_eq!(mean_f1(&s, &l, 0.5).unwrap(), 1.0);
        // every sample predicted fake
        let c = [0.5; 4];
        assert_eq!(average_recall(&c, &l, 0.5).unwrap(), 0.5);
        assert!((mean_f1(&c, &l, 0.5).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn video_scores() {
        assert_eq!(video_score(&[0.3]).unwrap(), 0.3);
        assert_eq!(video_score(&[0.0, 1.0]).unwrap(), 0.5);
        assert!(matches!(video_score(&[]), Err(Error::EmptyInput(_))));
        let groups: Vec<String> = ["b", "a", "b", "a"].iter().map(|s| s.to_string()).collect();
        let (names, scores, labels) = group_scores(&groups, &[0.2, 0.6, 0.4, 0.8], &[1, 0, 1, 0]).unwrap();
        assert_eq!(names, ["a", "b"]);
        assert!((scores[0] - 0.7).abs() < 1e-15 && (scores[1] - 0.3).abs() < 1e-15);
        assert_eq!(labels, [0, 1]);
        assert!(group_scores(&groups, &[0.1; 4], &[1, 0, 0, 0]).is_err());
    }
}
