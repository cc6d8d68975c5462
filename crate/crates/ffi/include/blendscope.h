#ifndef BLENDSCOPE_H
#define BLENDSCOPE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every call.
 */
typedef enum BsStatus {
  BS_STATUS_OK = 0,
  BS_STATUS_NULL_POINTER = 1,
  BS_STATUS_DIMENSION = 2,
  BS_STATUS_DEGENERATE_GEOMETRY = 3,
  BS_STATUS_DOMAIN = 4,
  BS_STATUS_CONTRACT = 5,
  BS_STATUS_UNDEFINED_METRIC = 6,
  BS_STATUS_EMPTY_INPUT = 7,
  BS_STATUS_NUMERIC = 8,
  BS_STATUS_CONFIG = 9,
  BS_STATUS_FORMAT = 10,
  BS_STATUS_IO = 11,
  BS_STATUS_PANIC = 12,
} BsStatus;

/*
 Perturbation kinds, in the library's order.
 */
typedef enum BsPerturbKind {
  BS_PERTURB_KIND_SATURATION = 0,
  BS_PERTURB_KIND_CONTRAST = 1,
  BS_PERTURB_KIND_BLOCK = 2,
  BS_PERTURB_KIND_NOISE = 3,
  BS_PERTURB_KIND_BLUR = 4,
  BS_PERTURB_KIND_PIXELATION = 5,
} BsPerturbKind;

/*
 Which label map of a bundle to fetch.
 */
typedef enum BsMap {
  BS_MAP_MASK = 0,
  BS_MAP_BOUNDARY = 1,
  BS_MAP_HEATMAP = 2,
  BS_MAP_CONSISTENCY = 3,
} BsMap;

/*
 Image, blend mask and label maps of one synthesized sample.
 */
typedef struct BsBundle BsBundle;

/*
 Row-major image with interleaved channels, values in [0, 1].
 */
typedef struct BsImage BsImage;

/*
 Row-major single-channel map.
 */
typedef struct BsPlane BsPlane;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the calling thread's last error message into `buf` (NUL
 terminated, truncated to `len - 1` bytes) and returns the full message
 length in bytes, excluding the terminator.

 # Safety
 `buf` must be null or point to `len` writable bytes.
 */
uintptr_t bs_last_error_message(char *buf, uintptr_t len);

/*
 Creates an image from `height * width * channels` interleaved values.

 # Safety
 `data` must point to that many readable values; `out` must be writable.
 */
enum BsStatus bs_image_new(uintptr_t height,
                           uintptr_t width,
                           uintptr_t channels,
                           const double *data,
                           struct BsImage **out);

/*
 Reads a PNG or JPEG file.

 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
enum BsStatus bs_image_read(const char *path, struct BsImage **out);

/*
 Writes an 8-bit PNG.

 # Safety
 `image` must be a live handle and `path` a NUL-terminated string.
 */
enum BsStatus bs_image_write_png(const struct BsImage *image, const char *path);

/*
 # Safety
 `image` must be a live handle; each output pointer may be null.
 */
enum BsStatus bs_image_dims(const struct BsImage *image,
                            uintptr_t *height,
                            uintptr_t *width,
                            uintptr_t *channels);

/*
 Copies the interleaved values into `out` (capacity `len`).

 # Safety
 `image` must be a live handle; `out` must hold `len` values.
 */
enum BsStatus bs_image_copy(const struct BsImage *image, double *out, uintptr_t len);

/*
 Releases an image; null is ignored.

 # Safety
 `image` must come from this library and not be used afterwards.
 */
void bs_image_free(struct BsImage *image);

/*
 # Safety
 `data` must point to `height * width` values; `out` must be writable.
 */
enum BsStatus bs_plane_new(uintptr_t height,
                           uintptr_t width,
                           const double *data,
                           struct BsPlane **out);

/*
 # Safety
 `plane` must be a live handle; each output pointer may be null.
 */
enum BsStatus bs_plane_dims(const struct BsPlane *plane, uintptr_t *height, uintptr_t *width);

/*
 # Safety
 `plane` must be a live handle; `out` must hold `len` values.
 */
enum BsStatus bs_plane_copy(const struct BsPlane *plane, double *out, uintptr_t len);

/*
 Releases a plane; null is ignored.

 # Safety
 `plane` must come from this library and not be used afterwards.
 */
void bs_plane_free(struct BsPlane *plane);

/*
 Filled convex hull of `n_points` `(x, y)` pairs, as a 0/1 plane.

 # Safety
 `xy` must point to `2 * n_points` values; `out` must be writable.
 */
enum BsStatus bs_hull_mask(const double *xy,
                           uintptr_t n_points,
                           uintptr_t height,
                           uintptr_t width,
                           struct BsPlane **out);

/*
 `mask * fg + (1 - mask) * bg`.

 # Safety
 All handles must be live; `out` must be writable.
 */
enum BsStatus bs_blend(const struct BsImage *fg,
                       const struct BsImage *bg,
                       const struct BsPlane *mask,
                       struct BsImage **out);

/*
 Boundary map `4 m (1 - m)` of a blend mask.

 # Safety
 `mask` must be live; `out` must be writable.
 */
enum BsStatus bs_boundary_mask(const struct BsPlane *mask, struct BsPlane **out);

/*
 Writes up to `capacity` vulnerable points (row-major order) into `rows`
 and `cols` and the total count into `count`. Call with `capacity == 0`
 to query the count.

 # Safety
 `boundary` must be live; `rows`/`cols` must hold `capacity` entries.
 */
enum BsStatus bs_vulnerable_points(const struct BsPlane *boundary,
                                   uintptr_t *rows,
                                   uintptr_t *cols,
                                   uintptr_t capacity,
                                   uintptr_t *count);

/*
 Adaptive Gaussian heatmap around the vulnerable points of `boundary`.

 # Safety
 `boundary` must be live; `out` must be writable.
 */
enum BsStatus bs_heatmap(const struct BsPlane *boundary,
                         double iou_threshold,
                         struct BsPlane **out);

/*
 Consistency map relative to the anchor `(row, col)`; a nonzero `is_real`
 returns the all-ones map and ignores the anchor.

 # Safety
 `boundary` must be live; `out` must be writable.
 */
enum BsStatus bs_consistency(const struct BsPlane *boundary,
                             uintptr_t anchor_row,
                             uintptr_t anchor_col,
                             int32_t is_real,
                             struct BsPlane **out);

/*
 Gaussian radius for a `height x width` box at IoU threshold `t`.

 # Safety
 `out` must be writable.
 */
enum BsStatus bs_gaussian_radius(double height, double width, double t, double *out);

/*
 # Safety
 Handles must be live; `out` must be writable.
 */
enum BsStatus bs_focal_heatmap_loss(const struct BsPlane *pred,
                                    const struct BsPlane *target,
                                    double gamma,
                                    double *out);

/*
 # Safety
 Handles must be live; `out` must be writable.
 */
enum BsStatus bs_consistency_loss(const struct BsPlane *pred,
                                  const struct BsPlane *target,
                                  double *out);

/*
 # Safety
 `out` must be writable.
 */
enum BsStatus bs_classification_loss(double logit,
                                     uint8_t label,
                                     double smoothing_eps,
                                     double *out);

/*
 `bce + lambda1 * heatmap + lambda2 * consistency`.

 # Safety
 `out` must be writable.
 */
enum BsStatus bs_total_loss(double bce,
                            double heatmap,
                            double consistency,
                            double lambda1,
                            double lambda2,
                            double *out);

/*
 # Safety
 `scores` and `labels` must hold `n` entries; `out` must be writable.
 */
enum BsStatus bs_auc(const double *scores, const uint8_t *labels, uintptr_t n, double *out);

/*
 # Safety
 `scores` and `labels` must hold `n` entries; `out` must be writable.
 */
enum BsStatus bs_average_precision(const double *scores,
                                   const uint8_t *labels,
                                   uintptr_t n,
                                   double *out);

/*
 # Safety
 Handles must be live; `out` must be writable.
 */
enum BsStatus bs_ssim(const struct BsImage *a, const struct BsImage *b, double *out);

/*
 SSIM over windows centred inside the binary `head_mask`.

 # Safety
 Handles must be live; `out` must be writable.
 */
enum BsStatus bs_mask_ssim(const struct BsImage *fake,
                           const struct BsImage *real,
                           const struct BsPlane *head_mask,
                           double *out);

/*
 Corrupts `image` at `severity` (0 is the identity, at most 5).

 # Safety
 `image` must be live; `out` must be writable.
 */
enum BsStatus bs_perturb(const struct BsImage *image,
                         enum BsPerturbKind kind,
                         uint8_t severity,
                         uint64_t seed,
                         struct BsImage **out);

/*
 Self-blended pseudo-fake of `image` with its 68 landmarks given as
 `(x, y)` pairs, resized to `size x size`, using the default synthesis
 settings otherwise.

 # Safety
 `landmarks_xy` must hold 136 values; `image` must be live; `out` must be
 writable.
 */
enum BsStatus bs_sbi_sample(const struct BsImage *image,
                            const double *landmarks_xy,
                            uint64_t seed,
                            uintptr_t size,
                            struct BsBundle **out);

/*
 Copies the bundle image into a new handle.

 # Safety
 `bundle` must be live; `out` must be writable.
 */
enum BsStatus bs_bundle_image(const struct BsBundle *bundle, struct BsImage **out);

/*
 Copies one label map of the bundle into a new handle.

 # Safety
 `bundle` must be live; `out` must be writable.
 */
enum BsStatus bs_bundle_map(const struct BsBundle *bundle, enum BsMap which, struct BsPlane **out);

/*
 # Safety
 `bundle` must be live; `label` must be writable.
 */
enum BsStatus bs_bundle_label(const struct BsBundle *bundle, uint8_t *label);

/*
 Releases a bundle; null is ignored.

 # Safety
 `bundle` must come from this library and not be used afterwards.
 */
void bs_bundle_free(struct BsBundle *bundle);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BLENDSCOPE_H */
