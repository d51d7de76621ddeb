/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef ROADTILE_H
#define ROADTILE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RtStatus {
  RT_STATUS_OK = 0,
  RT_STATUS_NULL_POINTER = 1,
  RT_STATUS_INVALID_ARGUMENT = 2,
  RT_STATUS_OUT_OF_BOUNDS = 3,
  RT_STATUS_DIMENSION_MISMATCH = 4,
  RT_STATUS_PARSE = 5,
  RT_STATUS_EMPTY_CLASS = 6,
  RT_STATUS_UNKNOWN_LABEL = 7,
  RT_STATUS_IO = 8,
  RT_STATUS_INTERNAL = 9,
} RtStatus;

typedef enum RtRoadClass {
  RT_ROAD_CLASS_UNMAPPED = -1,
  RT_ROAD_CLASS_MAJOR = 0,
  RT_ROAD_CLASS_MINOR = 1,
  RT_ROAD_CLASS_TWO_TRACK = 2,
} RtRoadClass;

typedef enum RtOcclusion {
  // Keep road pixels, zero the context.
  RT_OCCLUSION_CONTEXT_OCCLUDED = 0,
  // Keep context, zero road pixels.
  RT_OCCLUSION_ROAD_OCCLUDED = 1,
  // Replace the blue channel by mask * 255.
  RT_OCCLUSION_CHANNEL_REPLACE = 2,
} RtOcclusion;

// Confusion matrix over classes named `c0`, `c1`, ...
typedef struct RtConfusion RtConfusion;

// Binary raster mask.
typedef struct RtMask RtMask;

// Trained baseline classifier.
typedef struct RtModel RtModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *rt_last_error_message(void);

// Projects (`lon`, `lat`) into pixel coordinates of the tile centred on
// (`center_lon`, `center_lat`) covering `size_m` metres in `size_px` pixels.
//
// # Safety
// `x` and `y` must be valid for writes.
enum RtStatus rt_geo_to_pixel(double center_lon,
                              double center_lat,
                              double size_m,
                              uint32_t size_px,
                              double lon,
                              double lat,
                              double *x,
                              double *y);

// Inverse of `rt_geo_to_pixel`.
//
// # Safety
// `lon` and `lat` must be valid for writes.
enum RtStatus rt_pixel_to_geo(double center_lon,
                              double center_lat,
                              double size_m,
                              uint32_t size_px,
                              double x,
                              double y,
                              double *lon,
                              double *lat);

// Road class of an OSM `highway` value under the default mapping.
//
// # Safety
// `tag` must be a NUL-terminated string; `class_out` valid for writes.
enum RtStatus rt_map_highway_class(const char *tag, enum RtRoadClass *class_out);

// Empty `width` x `height` mask.
//
// # Safety
// `mask_out` must be valid for writes.
enum RtStatus rt_mask_new(uint32_t width, uint32_t height, struct RtMask **mask_out);

// Mask from `width * height` bytes; any nonzero byte is set.
//
// # Safety
// `values` must point to `width * height` bytes; `mask_out` valid for writes.
enum RtStatus rt_mask_from_values(uint32_t width,
                                  uint32_t height,
                                  const uint8_t *values,
                                  struct RtMask **mask_out);

// # Safety
// `mask` must come from this library and not be used afterwards.
void rt_mask_free(struct RtMask *mask);

// # Safety
// `mask` must be a live handle; `width` and `height` valid for writes.
enum RtStatus rt_mask_dims(const struct RtMask *mask, uint32_t *width, uint32_t *height);

// # Safety
// `mask` must be a live handle; `value` valid for writes.
enum RtStatus rt_mask_get(const struct RtMask *mask, uint32_t x, uint32_t y, bool *value);

// # Safety
// `mask` must be a live handle.
enum RtStatus rt_mask_set(struct RtMask *mask, uint32_t x, uint32_t y, bool value);

// # Safety
// `mask` must be a live handle; `count` valid for writes.
enum RtStatus rt_mask_count(const struct RtMask *mask, uintptr_t *count);

// Copies the mask as 0/1 bytes into `values`, which holds `len` bytes.
//
// # Safety
// `mask` must be a live handle; `values` valid for `len` writes.
enum RtStatus rt_mask_values(const struct RtMask *mask, uint8_t *values, uintptr_t len);

// One-pixel polyline through `n_points` integer points given as
// interleaved `x, y` pairs.
//
// # Safety
// `xy` must hold `2 * n_points` values; `mask_out` valid for writes.
enum RtStatus rt_rasterize_polyline(const int32_t *xy,
                                    uintptr_t n_points,
                                    uint32_t width,
                                    uint32_t height,
                                    struct RtMask **mask_out);

// Full road mask from a pixel-space polyline: points outside the raster
// are dropped, the rest joined and dilated by `radius`.
//
// # Safety
// `xy` must hold `2 * n_points` values; `mask_out` valid for writes.
enum RtStatus rt_road_mask(const double *xy,
                           uintptr_t n_points,
                           uint32_t width,
                           uint32_t height,
                           uint32_t radius,
                           struct RtMask **mask_out);

// Euclidean-disk dilation into a new mask.
//
// # Safety
// `mask` must be a live handle; `mask_out` valid for writes.
enum RtStatus rt_dilate(const struct RtMask *mask, uint32_t radius, struct RtMask **mask_out);

// Intersection over union; both empty gives 1 with `degenerate` set.
//
// # Safety
// Handles must be live; outputs valid for writes.
enum RtStatus rt_iou(const struct RtMask *a,
                     const struct RtMask *b,
                     double *value,
                     bool *degenerate);

// Keeps the tile unless every band mean exceeds `threshold`. `band_means`
// receives three values.
//
// # Safety
// `rgb` must hold `width * height * 3` bytes; `keep` valid for writes;
// `band_means` null or valid for three writes.
enum RtStatus rt_cloud_filter(const uint8_t *rgb,
                              uint32_t width,
                              uint32_t height,
                              double threshold,
                              bool *keep,
                              double *band_means);

// Applies an occlusion variant; `rgb_out` receives `width * height * 3`
// bytes and may alias `rgb`.
//
// # Safety
// `rgb` and `rgb_out` must hold `width * height * 3` bytes; `mask` must be
// a live handle of the same size.
enum RtStatus rt_occlude(const uint8_t *rgb,
                         uint32_t width,
                         uint32_t height,
                         const struct RtMask *mask,
                         enum RtOcclusion mode,
                         uint8_t *rgb_out);

// # Safety
// `cm_out` must be valid for writes.
enum RtStatus rt_confusion_new(uintptr_t num_classes, struct RtConfusion **cm_out);

// # Safety
// `cm` must come from this library and not be used afterwards.
void rt_confusion_free(struct RtConfusion *cm);

// # Safety
// `cm` must be a live handle.
enum RtStatus rt_confusion_accumulate(struct RtConfusion *cm, uintptr_t truth, uintptr_t predicted);

// Macro-F1, unweighted accuracy and balanced accuracy. An undefined
// accuracy (empty matrix, or a class with no true samples) is reported as
// NaN.
//
// # Safety
// `cm` must be a live handle; outputs valid for writes.
enum RtStatus rt_confusion_scores(const struct RtConfusion *cm,
                                  double *macro_f1,
                                  double *unweighted_accuracy,
                                  double *balanced_accuracy);

// Parses a model file written by `roadtile train`.
//
// # Safety
// `json` must be a NUL-terminated string; `model_out` valid for writes.
enum RtStatus rt_model_load_json(const char *json, struct RtModel **model_out);

// # Safety
// `model` must come from this library and not be used afterwards.
void rt_model_free(struct RtModel *model);

// # Safety
// `model` must be a live handle; `n_out` valid for writes.
enum RtStatus rt_model_num_classes(const struct RtModel *model, uintptr_t *n_out);

// Class probabilities for a cropped RGB image.
//
// # Safety
// `rgb` must hold `width * height * 3` bytes; `proba` valid for `len`
// writes.
enum RtStatus rt_model_predict_proba(const struct RtModel *model,
                                     const uint8_t *rgb,
                                     uint32_t width,
                                     uint32_t height,
                                     double *proba,
                                     uintptr_t len);

// Class probabilities for a precomputed feature vector.
//
// # Safety
// `features` must hold `n_features` values; `proba` valid for `len` writes.
enum RtStatus rt_model_predict_proba_features(const struct RtModel *model,
                                              const double *features,
                                              uintptr_t n_features,
                                              double *proba,
                                              uintptr_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROADTILE_H */
