#ifndef CAFDA_H
#define CAFDA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every exported function.
 */
typedef enum CafdaStatus {
  CAFDA_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  CAFDA_STATUS_NULL_POINTER = 1,
  /**
   * An argument is out of range or not valid UTF-8.
   */
  CAFDA_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The configuration was rejected.
   */
  CAFDA_STATUS_INVALID_CONFIG = 3,
  /**
   * The dataset could not be read or split.
   */
  CAFDA_STATUS_DATA_ERROR = 4,
  /**
   * The run failed while stepping.
   */
  CAFDA_STATUS_RUNTIME_ERROR = 5,
  /**
   * The run has reached its horizon or exhausted its pool.
   */
  CAFDA_STATUS_FINISHED = 6,
  /**
   * An internal panic was caught.
   */
  CAFDA_STATUS_PANIC = 7,
} CafdaStatus;

/**
 * Opaque step-by-step run.
 */
typedef struct CafdaRun CafdaRun;

/**
 * Opaque mixture weight vector.
 */
typedef struct CafdaWeights CafdaWeights;

/**
 * Mixture parameters: penalty `k0`, boost `k1`, weight bounds `[p_min, p_max]`.
 */
typedef struct CafdaParams {
  double k0;
  double k1;
  double p_min;
  double p_max;
} CafdaParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * The message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *cafda_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cafda_version(void);

/**
 * The default mixture parameters (0.8, 1.2, 0.001, 0.95).
 */
struct CafdaParams cafda_params_default(void);

/**
 * Release a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void cafda_string_free(char *s);

/**
 * Uniform weights over `k` experts. `params` may be NULL for the defaults.
 *
 * # Safety
 * `out` must be writable; `params`, when not NULL, must point to a `CafdaParams`.
 */
enum CafdaStatus cafda_weights_new(size_t k,
                                   const struct CafdaParams *params,
                                   struct CafdaWeights **out);

/**
 * # Safety
 * `w` must be NULL or a handle from [`cafda_weights_new`] not yet freed.
 */
void cafda_weights_free(struct CafdaWeights *w);

/**
 * Number of experts, 0 for NULL.
 *
 * # Safety
 * `w` must be NULL or a live handle.
 */
size_t cafda_weights_len(const struct CafdaWeights *w);

/**
 * Copy the weights into `buf`, which must hold at least `cap` doubles.
 *
 * # Safety
 * `w` must be a live handle; `buf` must be writable for `cap` doubles.
 */
enum CafdaStatus cafda_weights_copy(const struct CafdaWeights *w, double *buf, size_t cap);

/**
 * Apply the reward of expert `chosen`: positive rewards multiply its weight
 * by `k1`, others by `k0`; all weights are clamped and renormalized.
 *
 * # Safety
 * `w` must be a live handle.
 */
enum CafdaStatus cafda_weights_update(struct CafdaWeights *w, size_t chosen, double reward);

/**
 * Expert selected by the uniform draw `u` in `[0, 1)` (inverse CDF).
 *
 * # Safety
 * `w` must be a live handle and `out` writable.
 */
enum CafdaStatus cafda_weights_pick(const struct CafdaWeights *w, double u, size_t *out);

/**
 * Index drawn from the distribution `probs[0..n]` with the uniform draw `u`.
 *
 * # Safety
 * `probs` must be readable for `n` doubles and `out` writable.
 */
enum CafdaStatus cafda_sample_index(const double *probs, size_t n, double u, size_t *out);

/**
 * Start a run from configuration text (`key = value` lines). `policy` is a
 * strategy name or `"cafda"`; NULL selects the first configured strategy.
 *
 * # Safety
 * `config_text` must be a NUL-terminated string, `policy` NULL or one, and
 * `out` writable.
 */
enum CafdaStatus cafda_run_new(const char *config_text, const char *policy, struct CafdaRun **out);

/**
 * # Safety
 * `run` must be NULL or a handle from [`cafda_run_new`] not yet freed.
 */
void cafda_run_free(struct CafdaRun *run);

/**
 * The row to label next and its 1-based step. Repeated calls return the
 * same row until it is answered. Returns `FINISHED` at the end of the run.
 *
 * # Safety
 * `run` must be a live handle; `out_row` and `out_t` writable.
 */
enum CafdaStatus cafda_run_next(struct CafdaRun *run, size_t *out_row, size_t *out_t);

/**
 * Answer the pending row with `label` (0 legit, 1 fraud). `out_reward` and
 * `out_cum_reward` may be NULL.
 *
 * # Safety
 * `run` must be a live handle; non-NULL output pointers must be writable.
 */
enum CafdaStatus cafda_run_answer(struct CafdaRun *run,
                                  uint8_t label,
                                  double *out_reward,
                                  double *out_cum_reward);

/**
 * The dataset's recorded label of `row`, for simulated analysts.
 *
 * # Safety
 * `run` must be a live handle and `out` writable.
 */
enum CafdaStatus cafda_run_hidden_label(const struct CafdaRun *run, size_t row, uint8_t *out);

/**
 * Current mixture weights. `*out_len` receives the number of experts (0 for
 * single-strategy runs); nothing is copied when `cap` is too small.
 *
 * # Safety
 * `run` must be a live handle, `out_len` writable, and `buf` writable for
 * `cap` doubles (it may be NULL when `cap` is 0).
 */
enum CafdaStatus cafda_run_weights(const struct CafdaRun *run,
                                   double *buf,
                                   size_t cap,
                                   size_t *out_len);

/**
 * Cumulative reward so far, or NaN for NULL.
 *
 * # Safety
 * `run` must be NULL or a live handle.
 */
double cafda_run_cum_reward(const struct CafdaRun *run);

/**
 * The step log as JSON lines. Release with [`cafda_string_free`].
 *
 * # Safety
 * `run` must be a live handle and `out` writable.
 */
enum CafdaStatus cafda_run_log_json(const struct CafdaRun *run, char **out);

/**
 * The run's progress (step, reward, pool sizes, weights) as one JSON object.
 *
 * # Safety
 * `run` must be a live handle and `out` writable. Release with [`cafda_string_free`].
 */
enum CafdaStatus cafda_run_state_json(const struct CafdaRun *run, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CAFDA_H */
