#ifndef QBSD_H
#define QBSD_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QbsdStatus {
  QBSD_STATUS_OK = 0,
  QBSD_STATUS_NULL_POINTER = 1,
  QBSD_STATUS_INVALID_ARGUMENT = 2,
  QBSD_STATUS_INSUFFICIENT_HISTORY = 3,
  QBSD_STATUS_OUTSIDE_RETAINED_WINDOW = 4,
  QBSD_STATUS_MISALIGNED = 5,
  QBSD_STATUS_NON_FINITE = 6,
  QBSD_STATUS_PANIC = 99,
} QbsdStatus;

/**
 * Opaque forecaster handle.
 */
typedef struct QbsdForecaster QbsdForecaster;

/**
 * Result of one forecast step. Residual fields are NaN when no actual value
 * was supplied.
 */
typedef struct QbsdStep {
  double forecast;
  double q1;
  double q3;
  double iqr;
  double diff_residual;
  double norm_residual;
  size_t sample_count;
  bool fallback_used;
} QbsdStep;

typedef struct QbsdQuartiles {
  double q1;
  double q3;
  double iqr;
} QbsdQuartiles;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a forecaster on a grid of `interval_seconds` using the weekly
 * scheme with `n_weeks` lags and half-width `k` slots. `capacity` is the
 * retained history in slots, or 0 for the default of four weeks.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle pointer.
 */
enum QbsdStatus qbsd_forecaster_new(uint32_t interval_seconds,
                                    uint32_t n_weeks,
                                    uint32_t k,
                                    double c,
                                    uint64_t capacity,
                                    struct QbsdForecaster **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `f` must be null or a handle from [`qbsd_forecaster_new`] not yet freed.
 */
void qbsd_forecaster_free(struct QbsdForecaster *f);

/**
 * Forecasts the slot at `timestamp`, scores `value` against it, then
 * buffers `value`. The value is buffered even when the forecast fails.
 *
 * # Safety
 * `f` must be a live handle and `out` writable or null.
 */
enum QbsdStatus qbsd_forecaster_observe(struct QbsdForecaster *f,
                                        int64_t timestamp,
                                        double value,
                                        struct QbsdStep *out);

/**
 * Forecast for `timestamp` from the buffered history without changing it.
 *
 * # Safety
 * `f` must be a live handle and `out` writable.
 */
enum QbsdStatus qbsd_forecaster_forecast_at(const struct QbsdForecaster *f,
                                            int64_t timestamp,
                                            struct QbsdStep *out);

/**
 * Buffers `len` values without forecasting. Stops at the first bad pair.
 *
 * # Safety
 * `timestamps` and `values` must each point to `len` readable elements.
 */
enum QbsdStatus qbsd_forecaster_ingest(struct QbsdForecaster *f,
                                       const int64_t *timestamps,
                                       const double *values,
                                       size_t len);

/**
 * Number of buffered values, or 0 for a null handle.
 *
 * # Safety
 * `f` must be null or a live handle.
 */
size_t qbsd_forecaster_len(const struct QbsdForecaster *f);

/**
 * Linear-interpolation quartiles of `len` values.
 *
 * # Safety
 * `values` must point to `len` readable elements and `out` be writable.
 */
enum QbsdStatus qbsd_compute_quartiles(const double *values, size_t len, struct QbsdQuartiles *out);

/**
 * Message of the last failure on this thread, or null. Valid until the next
 * failing call on the same thread.
 */
const char *qbsd_last_error_message(void);

/**
 * Static name of a status code.
 */
const char *qbsd_status_str(enum QbsdStatus status);

const char *qbsd_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QBSD_H */
