//! C ABI over the `blendscope` library.
//!
//! Objects cross the boundary as opaque handles (`BsImage`, `BsPlane`,
//! `BsBundle`) that the caller releases with the matching `*_free`. Every
//! function returns a [`BsStatus`]; on failure a message is available from
//! [`bs_last_error_message`] on the same thread. Output pointers are only
//! written on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use blendscope::eval::{self, PerturbKind, PerturbationSpec};
use blendscope::imaging::{self, Image, LandmarkSet, Plane, Point, SoftMask};
use blendscope::labels::{self, BoundaryMask};
use blendscope::losses;
use blendscope::synth::{self, GroundTruthBundle, SynthConfig};
use blendscope::Error;

/// Result of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BsStatus {
    Ok = 0,
    NullPointer = 1,
    Dimension = 2,
    DegenerateGeometry = 3,
    Domain = 4,
    Contract = 5,
    UndefinedMetric = 6,
    EmptyInput = 7,
    Numeric = 8,
    Config = 9,
    Format = 10,
    Io = 11,
    Panic = 12,
}

/// Which label map of a bundle to fetch.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BsMap {
    Mask = 0,
    Boundary = 1,
    Heatmap = 2,
    Consistency = 3,
}

/// Perturbation kinds, in the library's order.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BsPerturbKind {
    Saturation = 0,
    Contrast = 1,
    Block = 2,
    Noise = 3,
    Blur = 4,
    Pixelation = 5,
}

/// Row-major image with interleaved channels, values in [0, 1].
pub struct BsImage(Image);
/// Row-major single-channel map.
pub struct BsPlane(Plane);
/// Image, blend mask and label maps of one synthesized sample.
pub struct BsBundle(GroundTruthBundle);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> BsStatus {
    match e {
        Error::Dimension(_) => BsStatus::Dimension,
        Error::DegenerateGeometry(_) => BsStatus::DegenerateGeometry,
        Error::Domain(_) => BsStatus::Domain,
        Error::Contract(_) => BsStatus::Contract,
        Error::UndefinedMetric(_) => BsStatus::UndefinedMetric,
        Error::EmptyInput(_) => BsStatus::EmptyInput,
        Error::Numeric(_) => BsStatus::Numeric,
        Error::Config(_) => BsStatus::Config,
        Error::Format { .. } | Error::Codec(_) | Error::Json(_) => BsStatus::Format,
        Error::Io { .. } => BsStatus::Io,
    }
}

struct Null;

enum Failure {
    Null,
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<Null> for Failure {
    fn from(_: Null) -> Self {
        Failure::Null
    }
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            BsStatus::Ok
        }
        Ok(Err(Failure::Null)) => {
            set_error("null pointer argument".into());
            BsStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            BsStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T) -> Result<&'a T, Null> {
    p.as_ref().ok_or(Null)
}

unsafe fn slice_in<'a, T>(p: *const T, len: usize) -> Result<&'a [T], Null> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Null);
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null);
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_value<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null);
    }
    *out = value;
    Ok(())
}

unsafe fn path_arg(p: *const c_char) -> Result<String, Failure> {
    if p.is_null() {
        return Err(Failure::Null);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Failure::Lib(Error::Config("path is not valid UTF-8".into())))
}

fn copy_out(src: &[f64], dst: *mut f64, len: usize) -> Result<(), Failure> {
    if len < src.len() {
        return Err(Failure::Lib(Error::Dimension(format!(
            "output buffer holds {len} values, need {}",
            src.len()
        ))));
    }
    if dst.is_null() {
        return Err(Failure::Null);
    }
    unsafe { ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len()) };
    Ok(())
}

fn soft_mask(plane: &Plane) -> Result<SoftMask, Error> {
    SoftMask::new(plane.clone())
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len - 1` bytes) and returns the full message
/// length in bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn bs_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

// ---- images -----------------------------------------------------------

/// Creates an image from `height * width * channels` interleaved values.
///
/// # Safety
/// `data` must point to that many readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_image_new(
    height: usize,
    width: usize,
    channels: usize,
    data: *const f64,
    out: *mut *mut BsImage,
) -> BsStatus {
    guard(|| {
        let n = height
            .checked_mul(width)
            .and_then(|v| v.checked_mul(channels))
            .ok_or_else(|| Error::Dimension("image size overflows".into()))?;
        let values = slice_in(data, n)?.to_vec();
        put(out, BsImage(Image::new(height, width, channels, values)?))
    })
}

/// Reads a PNG or JPEG file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_image_read(path: *const c_char, out: *mut *mut BsImage) -> BsStatus {
    guard(|| {
        let path = path_arg(path)?;
        put(out, BsImage(Image::read(path)?))
    })
}

/// Writes an 8-bit PNG.
///
/// # Safety
/// `image` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn bs_image_write_png(image: *const BsImage, path: *const c_char) -> BsStatus {
    guard(|| {
        let image = get(image)?;
        let path = path_arg(path)?;
        image.0.write_png(path)?;
        Ok(())
    })
}

/// # Safety
/// `image` must be a live handle; each output pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn bs_image_dims(
    image: *const BsImage,
    height: *mut usize,
    width: *mut usize,
    channels: *mut usize,
) -> BsStatus {
    guard(|| {
        let image = &get(image)?.0;
        for (p, v) in [
            (height, image.height()),
            (width, image.width()),
            (channels, image.channels()),
        ] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Copies the interleaved values into `out` (capacity `len`).
///
/// # Safety
/// `image` must be a live handle; `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn bs_image_copy(image: *const BsImage, out: *mut f64, len: usize) -> BsStatus {
    guard(|| copy_out(get(image)?.0.data(), out, len))
}

/// Releases an image; null is ignored.
///
/// # Safety
/// `image` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bs_image_free(image: *mut BsImage) {
    if !image.is_null() {
        drop(Box::from_raw(image));
    }
}

// ---- planes -----------------------------------------------------------

/// # Safety
/// `data` must point to `height * width` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_plane_new(
    height: usize,
    width: usize,
    data: *const f64,
    out: *mut *mut BsPlane,
) -> BsStatus {
    guard(|| {
        let n = height
            .checked_mul(width)
            .ok_or_else(|| Error::Dimension("plane size overflows".into()))?;
        put(out, BsPlane(Plane::new(height, width, slice_in(data, n)?.to_vec())?))
    })
}

/// # Safety
/// `plane` must be a live handle; each output pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn bs_plane_dims(plane: *const BsPlane, height: *mut usize, width: *mut usize) -> BsStatus {
    guard(|| {
        let p = &get(plane)?.0;
        if !height.is_null() {
            *height = p.height();
        }
        if !width.is_null() {
            *width = p.width();
        }
        Ok(())
    })
}

/// # Safety
/// `plane` must be a live handle; `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn bs_plane_copy(plane: *const BsPlane, out: *mut f64, len: usize) -> BsStatus {
    guard(|| copy_out(get(plane)?.0.data(), out, len))
}

/// Releases a plane; null is ignored.
///
/// # Safety
/// `plane` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bs_plane_free(plane: *mut BsPlane) {
    if !plane.is_null() {
        drop(Box::from_raw(plane));
    }
}

// ---- geometry and labels ---------------------------------------------

/// Filled convex hull of `n_points` `(x, y)` pairs, as a 0/1 plane.
///
/// # Safety
/// `xy` must point to `2 * n_points` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_hull_mask(
    xy: *const f64,
    n_points: usize,
    height: usize,
    width: usize,
    out: *mut *mut BsPlane,
) -> BsStatus {
    guard(|| {
        let xy = slice_in(xy, 2 * n_points)?;
        let pts: Vec<Point> = xy.chunks_exact(2).map(|p| Point::new(p[0], p[1])).collect();
        let mask = imaging::convex_hull_mask(&pts, height, width)?;
        put(out, BsPlane(mask.into_plane()))
    })
}

/// `mask * fg + (1 - mask) * bg`.
///
/// # Safety
/// All handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_blend(
    fg: *const BsImage,
    bg: *const BsImage,
    mask: *const BsPlane,
    out: *mut *mut BsImage,
) -> BsStatus {
    guard(|| {
        let m = soft_mask(&get(mask)?.0)?;
        put(out, BsImage(imaging::blend(&get(fg)?.0, &get(bg)?.0, &m)?))
    })
}

/// Boundary map `4 m (1 - m)` of a blend mask.
///
/// # Safety
/// `mask` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_boundary_mask(mask: *const BsPlane, out: *mut *mut BsPlane) -> BsStatus {
    guard(|| {
        let m = soft_mask(&get(mask)?.0)?;
        put(out, BsPlane(labels::boundary_mask(&m).into_plane()))
    })
}

/// Writes up to `capacity` vulnerable points (row-major order) into `rows`
/// and `cols` and the total count into `count`. Call with `capacity == 0`
/// to query the count.
///
/// # Safety
/// `boundary` must be live; `rows`/`cols` must hold `capacity` entries.
#[no_mangle]
pub unsafe extern "C" fn bs_vulnerable_points(
    boundary: *const BsPlane,
    rows: *mut usize,
    cols: *mut usize,
    capacity: usize,
    count: *mut usize,
) -> BsStatus {
    guard(|| {
        let b = BoundaryMask::from_plane(get(boundary)?.0.clone())?;
        let pts = labels::vulnerable_points(&b);
        if capacity > 0 && (rows.is_null() || cols.is_null()) {
            return Err(Failure::Null);
        }
        for (k, &(i, j)) in pts.points().iter().take(capacity).enumerate() {
            *rows.add(k) = i;
            *cols.add(k) = j;
        }
        put_value(count, pts.len())
    })
}

/// Adaptive Gaussian heatmap around the vulnerable points of `boundary`.
///
/// # Safety
/// `boundary` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_heatmap(boundary: *const BsPlane, iou_threshold: f64, out: *mut *mut BsPlane) -> BsStatus {
    guard(|| {
        let b = BoundaryMask::from_plane(get(boundary)?.0.clone())?;
        let pts = labels::vulnerable_points(&b);
        put(out, BsPlane(labels::heatmap_gt(&pts, &b, iou_threshold)?.into_plane()))
    })
}

/// Consistency map relative to the anchor `(row, col)`; a nonzero `is_real`
/// returns the all-ones map and ignores the anchor.
///
/// # Safety
/// `boundary` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_consistency(
    boundary: *const BsPlane,
    anchor_row: usize,
    anchor_col: usize,
    is_real: i32,
    out: *mut *mut BsPlane,
) -> BsStatus {
    guard(|| {
        let b = BoundaryMask::from_plane(get(boundary)?.0.clone())?;
        let real = is_real != 0;
        let anchor = (!real).then_some((anchor_row, anchor_col));
        put(out, BsPlane(labels::consistency_gt(&b, anchor, real)?.into_plane()))
    })
}

/// Gaussian radius for a `height x width` box at IoU threshold `t`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_gaussian_radius(height: f64, width: f64, t: f64, out: *mut f64) -> BsStatus {
    guard(|| put_value(out, labels::gaussian_radius(height, width, t)?))
}

// ---- losses -----------------------------------------------------------

/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_focal_heatmap_loss(
    pred: *const BsPlane,
    target: *const BsPlane,
    gamma: f64,
    out: *mut f64,
) -> BsStatus {
    guard(|| put_value(out, losses::focal_heatmap_loss(&get(pred)?.0, &get(target)?.0, gamma)?))
}

/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_consistency_loss(pred: *const BsPlane, target: *const BsPlane, out: *mut f64) -> BsStatus {
    guard(|| put_value(out, losses::consistency_loss(&get(pred)?.0, &get(target)?.0)?))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_classification_loss(logit: f64, label: u8, smoothing_eps: f64, out: *mut f64) -> BsStatus {
    guard(|| {
        if label > 1 {
            return Err(Error::Domain(format!("label {label} is not 0 or 1")).into());
        }
        put_value(out, losses::classification_loss(logit, label, smoothing_eps))
    })
}

/// `bce + lambda1 * heatmap + lambda2 * consistency`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_total_loss(
    bce: f64,
    heatmap: f64,
    consistency: f64,
    lambda1: f64,
    lambda2: f64,
    out: *mut f64,
) -> BsStatus {
    guard(|| {
        let weights = losses::LossWeights {
            lambda1,
            lambda2,
            ..losses::LossWeights::default()
        };
        weights.validate()?;
        let parts = losses::LossParts {
            bce,
            heatmap,
            consistency,
        };
        put_value(out, losses::total_loss(&parts, &weights))
    })
}

// ---- evaluation -------------------------------------------------------

/// # Safety
/// `scores` and `labels` must hold `n` entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_auc(scores: *const f64, labels: *const u8, n: usize, out: *mut f64) -> BsStatus {
    guard(|| put_value(out, eval::auc(slice_in(scores, n)?, slice_in(labels, n)?)?))
}

/// # Safety
/// `scores` and `labels` must hold `n` entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_average_precision(
    scores: *const f64,
    labels: *const u8,
    n: usize,
    out: *mut f64,
) -> BsStatus {
    guard(|| {
        put_value(
            out,
            eval::average_precision(slice_in(scores, n)?, slice_in(labels, n)?)?,
        )
    })
}

/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_ssim(a: *const BsImage, b: *const BsImage, out: *mut f64) -> BsStatus {
    guard(|| put_value(out, eval::ssim(&get(a)?.0, &get(b)?.0)?))
}

/// SSIM over windows centred inside the binary `head_mask`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_mask_ssim(
    fake: *const BsImage,
    real: *const BsImage,
    head_mask: *const BsPlane,
    out: *mut f64,
) -> BsStatus {
    guard(|| {
        let m = soft_mask(&get(head_mask)?.0)?;
        put_value(out, eval::mask_ssim(&get(fake)?.0, &get(real)?.0, &m)?)
    })
}

/// Corrupts `image` at `severity` (0 is the identity, at most 5).
///
/// # Safety
/// `image` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_perturb(
    image: *const BsImage,
    kind: BsPerturbKind,
    severity: u8,
    seed: u64,
    out: *mut *mut BsImage,
) -> BsStatus {
    guard(|| {
        let kind = match kind {
            BsPerturbKind::Saturation => PerturbKind::Saturation,
            BsPerturbKind::Contrast => PerturbKind::Contrast,
            BsPerturbKind::Block => PerturbKind::Block,
            BsPerturbKind::Noise => PerturbKind::Noise,
            BsPerturbKind::Blur => PerturbKind::Blur,
            BsPerturbKind::Pixelation => PerturbKind::Pixelation,
        };
        let spec = PerturbationSpec::new(kind, severity)?;
        put(out, BsImage(eval::perturb(&get(image)?.0, spec, seed)?))
    })
}

// ---- synthesis --------------------------------------------------------

/// Self-blended pseudo-fake of `image` with its 68 landmarks given as
/// `(x, y)` pairs, resized to `size x size`, using the default synthesis
/// settings otherwise.
///
/// # Safety
/// `landmarks_xy` must hold 136 values; `image` must be live; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn bs_sbi_sample(
    image: *const BsImage,
    landmarks_xy: *const f64,
    seed: u64,
    size: usize,
    out: *mut *mut BsBundle,
) -> BsStatus {
    guard(|| {
        let xy = slice_in(landmarks_xy, 2 * imaging::LANDMARK_COUNT)?;
        let lm = LandmarkSet::new(xy.chunks_exact(2).map(|p| Point::new(p[0], p[1])).collect())?;
        let cfg = SynthConfig {
            size,
            ..SynthConfig::default()
        };
        put(out, BsBundle(synth::make_sbi_sample(&get(image)?.0, &lm, seed, &cfg)?))
    })
}

/// Copies the bundle image into a new handle.
///
/// # Safety
/// `bundle` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_bundle_image(bundle: *const BsBundle, out: *mut *mut BsImage) -> BsStatus {
    guard(|| put(out, BsImage(get(bundle)?.0.image.clone())))
}

/// Copies one label map of the bundle into a new handle.
///
/// # Safety
/// `bundle` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_bundle_map(bundle: *const BsBundle, which: BsMap, out: *mut *mut BsPlane) -> BsStatus {
    guard(|| {
        let b = &get(bundle)?.0;
        let plane = match which {
            BsMap::Mask => b.mask.plane().clone(),
            BsMap::Boundary => b.boundary.plane().clone(),
            BsMap::Heatmap => b.heatmap.plane().clone(),
            BsMap::Consistency => b.consistency.plane().clone(),
        };
        put(out, BsPlane(plane))
    })
}

/// # Safety
/// `bundle` must be live; `label` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_bundle_label(bundle: *const BsBundle, label: *mut u8) -> BsStatus {
    guard(|| put_value(label, get(bundle)?.0.label))
}

/// Releases a bundle; null is ignored.
///
/// # Safety
/// `bundle` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bs_bundle_free(bundle: *mut BsBundle) {
    if !bundle.is_null() {
        drop(Box::from_raw(bundle));
    }
}
