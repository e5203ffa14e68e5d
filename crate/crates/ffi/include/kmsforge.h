#ifndef KMSFORGE_H
#define KMSFORGE_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define KF_OK 0

#define KF_NULL_POINTER 1

#define KF_INVALID_UTF8 2

#define KF_SPEC 3

#define KF_INVALID_DIAGRAM 4

#define KF_DEPTH_EXCEEDED 5

#define KF_OVERFLOW 6

#define KF_DOMAIN 7

#define KF_PATH_CAP 8

#define KF_SHAPE_MISMATCH 9

#define KF_NUMERIC 10

#define KF_PANIC 11

/**
 * A parsed spec and the diagram it describes.
 */
typedef struct KfDiagram KfDiagram;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses a JSON spec (diagram, glue or pipeline) into a new handle.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
int32_t kf_diagram_from_json(const char *json, struct KfDiagram **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `d` must come from `kf_diagram_from_json` and not be used afterwards.
 */
void kf_diagram_free(struct KfDiagram *d);

/**
 * Sets `*passed` to 1 when levels `0..=depth` have no sources or sinks.
 *
 * # Safety
 * `d` must be a live handle and `passed` a valid pointer.
 */
int32_t kf_diagram_validate(const struct KfDiagram *d, size_t depth, int32_t *passed);

/**
 * Number of vertices on `level`.
 *
 * # Safety
 * `d` must be a live handle and `out` a valid pointer.
 */
int32_t kf_diagram_level_size(const struct KfDiagram *d, size_t level, size_t *out);

/**
 * Writes `A^(level)(β)` row-major into `out`, which holds `rows * cols` doubles.
 *
 * # Safety
 * `d` must be a live handle and `out` must point to `rows * cols` doubles.
 */
int32_t kf_transfer_matrix(const struct KfDiagram *d,
                           size_t level,
                           double beta,
                           double *out,
                           size_t rows,
                           size_t cols);

/**
 * Birkhoff's `φ` of a row-major nonnegative matrix.
 *
 * # Safety
 * `m` must point to `rows * cols` doubles and `out` be a valid pointer.
 */
int32_t kf_phi(const double *m, size_t rows, size_t cols, double *out);

/**
 * Sweep rows for a glue or pipeline spec as a JSON array; free with `kf_string_free`.
 *
 * `depth = 0` uses the spec's depth.
 *
 * # Safety
 * `d` must be a live handle, `betas` must point to `n` doubles and `out_json` be valid.
 */
int32_t kf_sweep_json(const struct KfDiagram *d,
                      const double *betas,
                      size_t n,
                      size_t depth,
                      char **out_json);

/**
 * Largest KMS defect at `level` over the states of the cone's extreme rays.
 *
 * # Safety
 * `d` must be a live handle and `out` a valid pointer.
 */
int32_t kf_kms_defect(const struct KfDiagram *d, double beta, size_t level, double *out);

/**
 * Frees a string returned by the library; null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void kf_string_free(char *s);

/**
 * Message of the last failed call on this thread, or null. Valid until the next call.
 */
const char *kf_last_error(void);

/**
 * Library version as a static string.
 */
const char *kf_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KMSFORGE_H */
