//! Ranking metrics, SSIM quality scores, robustness perturbations and
//! video-level aggregation.

mod metrics;
mod perturb;
mod report;
mod ssim;

pub use metrics::{
    auc, average_precision, average_recall, confusion, group_scores, mean_f1, video_score, Confusion, DEFAULT_THRESHOLD,
};
pub use perturb::{
    perturb, pixelate, PerturbKind, PerturbationSpec, BLOCK_COUNTS, BLOCK_FRACTION, BLUR_SIGMAS, CONTRAST_FACTORS,
    MAX_SEVERITY, NOISE_VARIANCES, SATURATION_FACTORS,
};
pub use report::{
    quality_binned_auc, read_scores, write_quality_bins, write_scores, MetricsReport, QualityBin, ScoreRow,
};
pub use ssim::{head_mask, mask_ssim, ssim, ssim_map, HEAD_DILATION, K1, K2, WINDOW, WINDOW_SIGMA};
