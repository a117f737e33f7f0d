#ifndef SMOOTHEXT_H
#define SMOOTHEXT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every entry point.
 */
typedef enum SxStatus {
  SX_STATUS_OK = 0,
  SX_STATUS_NULL_POINTER = 1,
  SX_STATUS_INVALID_ARGUMENT = 2,
  SX_STATUS_DOMAIN = 3,
  SX_STATUS_ORDER_EXCEEDED = 4,
  SX_STATUS_DEPTH_EXCEEDED = 5,
  SX_STATUS_CONSTRUCTION = 6,
  SX_STATUS_CONFIG = 7,
  SX_STATUS_IO = 8,
  /**
   * Some verification check failed (only from [`sx_run_config`]).
   */
  SX_STATUS_CHECKS_FAILED = 9,
  SX_STATUS_PANIC = 10,
} SxStatus;

/**
 * Opaque evaluator for `g`, `h` or a cozero witness.
 */
typedef struct SxEvaluator SxEvaluator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds the extension `h = f·g` of a catalog function from the open set
 * `⋃ (lo[j], hi[j])`.
 *
 * `params_json` may be null (catalog defaults) or a JSON object.
 * `k < 0` means C^∞. `max_depth = 0` selects the default depth.
 * On success `*out` holds an evaluator for `h`.
 *
 * # Safety
 * `lo` and `hi` must point to `count` doubles, the strings must be
 * NUL-terminated, and `out` must be writable.
 */
enum SxStatus sx_build_extension(const double *lo,
                                 const double *hi,
                                 size_t count,
                                 const char *function_id,
                                 const char *params_json,
                                 int32_t k,
                                 uint32_t max_depth,
                                 struct SxEvaluator **out);

/**
 * Builds a C^∞ function that is positive exactly on `⋃ (lo[j], hi[j])`.
 *
 * # Safety
 * As for [`sx_build_extension`].
 */
enum SxStatus sx_build_cozero(const double *lo,
                              const double *hi,
                              size_t count,
                              uint32_t max_depth,
                              struct SxEvaluator **out);

/**
 * Creates a new handle for the taming multiplier `g` behind `e`.
 *
 * # Safety
 * `e` must be a live handle and `out` writable.
 */
enum SxStatus sx_evaluator_multiplier(const struct SxEvaluator *e, struct SxEvaluator **out);

/**
 * Value at `x`.
 *
 * # Safety
 * `e` must be a live handle and `out` writable.
 */
enum SxStatus sx_eval(const struct SxEvaluator *e, double x, double *out);

/**
 * `order`-th derivative at `x`. Orders above the smoothness class give
 * [`SxStatus::OrderExceeded`].
 *
 * # Safety
 * `e` must be a live handle and `out` writable.
 */
enum SxStatus sx_eval_deriv(const struct SxEvaluator *e, uint32_t order, double x, double *out);

/**
 * Writes the smoothness order into `*k`, or -1 for C^∞.
 *
 * # Safety
 * `e` must be a live handle and `k` writable.
 */
enum SxStatus sx_evaluator_order(const struct SxEvaluator *e, int32_t *k);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `e` must come from this library and must not be used afterwards.
 */
void sx_evaluator_free(struct SxEvaluator *e);

/**
 * The unnormalized bump `σ(x)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum SxStatus sx_sigma(double x, double *out);

/**
 * The normalized mollifier `φ(x)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum SxStatus sx_phi(double x, double *out);

/**
 * The cumulative mollifier `Φ(x)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum SxStatus sx_phi_big(double x, double *out);

/**
 * Runs a JSON configuration (the command-line format) and stores the report
 * JSON in `*report_out`, to be released with [`sx_string_free`]. Returns
 * [`SxStatus::ChecksFailed`] when the run completes with failing checks;
 * the report is still written in that case. Configured output files are
 * written as well.
 *
 * # Safety
 * `config_json` must be NUL-terminated and `report_out` writable.
 */
enum SxStatus sx_run_config(const char *config_json, char **report_out);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and must not be used afterwards.
 */
void sx_string_free(char *s);

/**
 * Message for the most recent failure on this thread, or null. Valid until
 * the next call into the library from the same thread.
 */
const char *sx_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SMOOTHEXT_H */
