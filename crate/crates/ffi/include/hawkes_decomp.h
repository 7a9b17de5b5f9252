#ifndef HAWKES_DECOMP_H
#define HAWKES_DECOMP_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum HdStatus {
  HD_STATUS_OK = 0,
  HD_STATUS_NULL_POINTER = 1,
  HD_STATUS_INVALID_ARGUMENT = 2,
  HD_STATUS_INVALID_SEQUENCE = 3,
  HD_STATUS_NON_STATIONARY = 4,
  HD_STATUS_NO_STATIONARY_MODEL = 5,
  HD_STATUS_NUMERICAL = 6,
  HD_STATUS_BUFFER_TOO_SMALL = 7,
  HD_STATUS_PANIC = 8,
} HdStatus;

/**
 * An event sequence on `[0, horizon]`.
 */
typedef struct HdEvents HdEvents;

/**
 * A Hawkes model (background rate and kernel).
 */
typedef struct HdModel HdModel;

/**
 * Output of a decomposition run.
 */
typedef struct HdResult HdResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Description of the last failure on this thread, or NULL. The pointer is
 * valid until the next call into this library from the same thread.
 */
const char *hd_last_error(void);

/**
 * Parses a model from JSON such as
 * `{"mu":1.0,"kernel":{"type":"EXP","alpha":0.5,"beta":1.0}}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HdStatus hd_model_from_json(const char *json, struct HdModel **out);

/**
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void hd_model_free(struct HdModel *model);

/**
 * Kernel norm (or upper bound, flagged by `is_bound`) and the verdict.
 *
 * # Safety
 * All pointers must be valid.
 */
enum HdStatus hd_model_stationarity(const struct HdModel *model,
                                    double *norm,
                                    bool *is_bound,
                                    bool *stationary);

/**
 * Builds a sequence from `n` strictly increasing times in `[0, horizon]`.
 *
 * # Safety
 * `times` must point to `n` doubles (may be NULL when `n == 0`).
 */
enum HdStatus hd_events_new(const double *times, size_t n, double horizon, struct HdEvents **out);

/**
 * Number of events, 0 for NULL.
 *
 * # Safety
 * `events` must be NULL or come from this library.
 */
size_t hd_events_len(const struct HdEvents *events);

/**
 * # Safety
 * `events` must be NULL or come from this library.
 */
double hd_events_horizon(const struct HdEvents *events);

/**
 * Copies the event times into `buf` (capacity `cap`); fails with
 * `BufferTooSmall` when `cap < hd_events_len(events)`.
 *
 * # Safety
 * `buf` must point to `cap` writable doubles.
 */
enum HdStatus hd_events_copy_times(const struct HdEvents *events, double *buf, size_t cap);

/**
 * # Safety
 * `events` must come from this library and not be used afterwards.
 */
void hd_events_free(struct HdEvents *events);

/**
 * Simulates the model on `[0, horizon]` with a seeded generator.
 *
 * # Safety
 * `model` and `out` must be valid.
 */
enum HdStatus hd_simulate(const struct HdModel *model,
                          double horizon,
                          uint64_t seed,
                          struct HdEvents **out);

/**
 * Log-likelihood of the events under the model; `-INFINITY` when some
 * intensity is not positive.
 *
 * # Safety
 * All pointers must be valid.
 */
enum HdStatus hd_log_likelihood(const struct HdModel *model,
                                const struct HdEvents *events,
                                double *out);

/**
 * Runs the decomposition. `config_json` may be NULL for defaults or a JSON
 * object with any of `resolution`, `percentile`, `tau_max`, `eta`,
 * `holdout`, `split_time`, `gd_restarts`, `quadrature_fallback`,
 * `additive_refit`.
 *
 * # Safety
 * `events` and `out` must be valid; `config_json` NULL or NUL-terminated.
 */
enum HdStatus hd_decompose(const struct HdEvents *events,
                           const char *config_json,
                           struct HdResult **out);

/**
 * The selected model as a new handle.
 *
 * # Safety
 * `result` and `out` must be valid.
 */
enum HdStatus hd_result_model(const struct HdResult *result, struct HdModel **out);

/**
 * Serializes the result as JSON into a new string released with
 * [`hd_string_free`].
 *
 * # Safety
 * `result` and `out` must be valid.
 */
enum HdStatus hd_result_to_json(const struct HdResult *result, char **out);

/**
 * # Safety
 * `result` must come from this library and not be used afterwards.
 */
void hd_result_free(struct HdResult *result);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void hd_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HAWKES_DECOMP_H */
