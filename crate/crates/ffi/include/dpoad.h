#ifndef DPOAD_H
#define DPOAD_H

/* Generated by cbindgen at build time. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DpoadStatus {
  DPOAD_STATUS_OK = 0,
  DPOAD_STATUS_NULL_POINTER = 1,
  DPOAD_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Argument outside the mathematical domain of the function.
   */
  DPOAD_STATUS_DOMAIN = 3,
  /**
   * Output buffer too short; the required length was written.
   */
  DPOAD_STATUS_BUFFER_TOO_SMALL = 4,
  DPOAD_STATUS_INTERNAL = 5,
} DpoadStatus;

typedef enum DpoadMechanism {
  DPOAD_MECHANISM_LAPLACE = 0,
  DPOAD_MECHANISM_PAIN_FREE = 1,
  DPOAD_MECHANISM_DPOAD = 2,
} DpoadMechanism;

typedef enum DpoadPhase {
  DPOAD_PHASE_LEARNING = 0,
  DPOAD_PHASE_PREDICTION = 1,
} DpoadPhase;

/**
 * Owner and analyst sharing one layout, plus the trace so far.
 */
typedef struct DpoadSession DpoadSession;

/**
 * Session parameters. Start from [`dpoad_config_default`].
 */
typedef struct DpoadConfig {
  enum DpoadMechanism mechanism;
  double epsilon;
  double gamma;
  /**
   * KS score above which a unit is flagged.
   */
  double threshold;
  uint64_t c_max;
  size_t bins;
  size_t unit_len;
  uint64_t seed;
} DpoadConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Static description of a status code. Never null, never freed.
 */
const char *dpoad_status_str(enum DpoadStatus status);

/**
 * Message of the last failure on this thread, or null if there was none.
 * Valid until the next failing call on the same thread.
 */
const char *dpoad_last_error(void);

/**
 * # Safety
 * `out` must be null or point at a writable `DpoadConfig`.
 */
enum DpoadStatus dpoad_config_default(struct DpoadConfig *out);

/**
 * Lower real branch of Lambert W on `[-1/e, 0)`.
 *
 * # Safety
 * `out` must be null or point at a writable f64.
 */
enum DpoadStatus dpoad_lambert_w_minus1(double x, double *out);

/**
 * Mismatch probability minimizing the learning-phase sample size.
 *
 * # Safety
 * `out` must be null or point at a writable f64.
 */
enum DpoadStatus dpoad_rho_star_learning(double gamma, double *out);

/**
 * # Safety
 * `out` must be null or point at a writable f64.
 */
enum DpoadStatus dpoad_utility_ratio_bound(double epsilon, uint64_t m, uint64_t k, double *out);

/**
 * Two-sample KS statistic.
 *
 * # Safety
 * `a` and `b` must point at `a_len` and `b_len` readable doubles; `out`
 * must be null or writable.
 */
enum DpoadStatus dpoad_ks_statistic(const double *a,
                                    size_t a_len,
                                    const double *b,
                                    size_t b_len,
                                    double *out);

/**
 * Creates a session over attributes with the given value ranges. On
 * success `*out` owns the session; release it with [`dpoad_session_free`].
 *
 * # Safety
 * `config` must be null or readable; `lo` and `hi` must point at
 * `n_attributes` doubles each; `out` must be null or writable.
 */
enum DpoadStatus dpoad_session_new(const struct DpoadConfig *config,
                                   const double *lo,
                                   const double *hi,
                                   size_t n_attributes,
                                   struct DpoadSession **out);

/**
 * Runs one round on a row-major `rows x cols` count matrix.
 *
 * # Safety
 * `session` must come from [`dpoad_session_new`]; `counts` must point at
 * `rows * cols` readable values.
 */
enum DpoadStatus dpoad_session_step_counts(struct DpoadSession *session,
                                           const uint64_t *counts,
                                           size_t rows,
                                           size_t cols);

/**
 * Copies the cumulative anomaly scores of the latest round into `out`.
 * `*len` always receives the score count; if it exceeds `capacity`
 * nothing is copied and `BufferTooSmall` is returned.
 *
 * # Safety
 * `session` must come from [`dpoad_session_new`]; `out` must point at
 * `capacity` writable doubles; `len` must be writable.
 */
enum DpoadStatus dpoad_session_scores(const struct DpoadSession *session,
                                      double *out,
                                      size_t capacity,
                                      size_t *len);

/**
 * Phase the owner will release in next.
 *
 * # Safety
 * `session` must come from [`dpoad_session_new`]; `out` must be writable.
 */
enum DpoadStatus dpoad_session_phase(const struct DpoadSession *session, enum DpoadPhase *out);

/**
 * Text form of every message exchanged so far. Release the returned
 * string with [`dpoad_string_free`].
 *
 * # Safety
 * `session` must come from [`dpoad_session_new`]; `out` must be writable.
 */
enum DpoadStatus dpoad_session_trace_text(const struct DpoadSession *session, char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void dpoad_string_free(char *s);

/**
 * # Safety
 * `session` must be null or come from [`dpoad_session_new`], not yet freed.
 */
void dpoad_session_free(struct DpoadSession *session);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DPOAD_H */
