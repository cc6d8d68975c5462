//! Blending-artifact supervision for face-forgery detection.
//!
//! The crate covers the full data path of a localized-artifact detector trained
//! only on real faces:
//!
//! * [`imaging`]: image containers, convex-hull masks, mask deformation and blending.
//! * [`labels`]: boundary masks, vulnerable points, adaptive Gaussian heatmaps and
//!   self-consistency maps.
//! * [`synth`]: deterministic BI/SBI pseudo-fake synthesis, augmentation and manifests.
//! * [`losses`]: focal heatmap loss, consistency BCE, classification BCE and their sum.
//! * [`model`]: a small CPU convolutional detector with a weighted top-down pyramid
//!   fusion and hand-derived gradients.
//! * [`eval`]: ranking metrics, SSIM / Mask-SSIM, perturbations, video aggregation.
//! * [`cli`]: the `blendscope` command-line front end.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod eval;
pub mod imaging;
pub mod labels;
pub mod losses;
pub mod model;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use imaging::{Image, LandmarkSet, SoftMask};
