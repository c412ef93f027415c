#ifndef COLEARN_H
#define COLEARN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum ColearnStatus {
  COLEARN_STATUS_OK = 0,
  COLEARN_STATUS_NULL_POINTER = 1,
  COLEARN_STATUS_INVALID_ARGUMENT = 2,
  COLEARN_STATUS_DIMENSION_MISMATCH = 3,
  COLEARN_STATUS_INVALID_CONFIG = 4,
  /**
   * The simulation has not been run yet.
   */
  COLEARN_STATUS_NOT_RUN = 5,
  COLEARN_STATUS_PANIC = 6,
} ColearnStatus;

/**
 * r-bounded hemimetrics on `n` items.
 */
typedef struct ColearnHemimetric ColearnHemimetric;

/**
 * A run configuration and, once run, its traces.
 */
typedef struct ColearnSimulation ColearnSimulation;

/**
 * Certificate returned with a projection.
 */
typedef struct ColearnProjectionInfo {
  /**
   * Weighted squared distance of the output from the input.
   */
  double primal;
  /**
   * Lower bound on the optimal distance.
   */
  double dual;
  double gap;
  size_t sweeps;
  /**
   * The sweep cap was hit before the gap target.
   */
  bool capped;
} ColearnProjectionInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` as a
 * NUL-terminated string, truncating to `len − 1` bytes. Returns the full
 * message length in bytes, excluding the terminator, so a call with
 * `len = 0` sizes the buffer.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t colearn_last_error_message(char *buf, size_t len);

/**
 * Creates the hemimetric structure on `n ≥ 2` items with entries in `[0, r]`.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum ColearnStatus colearn_hemimetric_new(size_t n, double r, struct ColearnHemimetric **out);

/**
 * Releases a handle from [`colearn_hemimetric_new`]. Null is ignored.
 *
 * # Safety
 * `h` must be null or a live handle, and is invalid afterwards.
 */
void colearn_hemimetric_free(struct ColearnHemimetric *h);

/**
 * Number of ordered pairs, `n·(n − 1)`; 0 for a null handle.
 *
 * # Safety
 * `h` must be null or a live handle.
 */
size_t colearn_hemimetric_len(const struct ColearnHemimetric *h);

/**
 * Position of the zero-based ordered pair `(i, j)`, `i ≠ j`, in the vectors
 * passed to the other hemimetric calls.
 *
 * # Safety
 * `h` must be a live handle and `out` valid for a write.
 */
enum ColearnStatus colearn_hemimetric_pair_index(const struct ColearnHemimetric *h,
                                                 size_t i,
                                                 size_t j,
                                                 size_t *out);

/**
 * Projects `d` onto the structure under the weighted distance
 * `Σ q (x − d)²`, stopping once the duality gap is at most `delta`.
 * `q = NULL` means unit weights; zero weights are allowed and leave their
 * pairs to be filled feasibly. `d`, `q` and `out` have `len` entries and
 * `out` may alias `d`. `info` may be null.
 *
 * # Safety
 * Pointers must be valid for `len` elements (or null where allowed).
 */
enum ColearnStatus colearn_hemimetric_project(const struct ColearnHemimetric *h,
                                              const double *d,
                                              const double *q,
                                              size_t len,
                                              double delta,
                                              double *out,
                                              struct ColearnProjectionInfo *info);

/**
 * Downward repair of `d` into the structure by shortest-path relaxation and
 * clipping. `out` may alias `d`.
 *
 * # Safety
 * `d` and `out` must be valid for `len` elements.
 */
enum ColearnStatus colearn_hemimetric_repair(const struct ColearnHemimetric *h,
                                             const double *d,
                                             size_t len,
                                             double *out);

/**
 * Creates a simulation from a JSON configuration; absent fields, or a null
 * `config_json`, take the defaults.
 *
 * # Safety
 * `config_json` must be null or a NUL-terminated string; `out` must be
 * valid for a pointer write.
 */
enum ColearnStatus colearn_simulation_new(const char *config_json, struct ColearnSimulation **out);

/**
 * Releases a handle from [`colearn_simulation_new`]. Null is ignored.
 *
 * # Safety
 * `s` must be null or a live handle, and is invalid afterwards.
 */
void colearn_simulation_free(struct ColearnSimulation *s);

/**
 * Runs every configured run, replacing earlier results.
 *
 * # Safety
 * `s` must be a live handle not used concurrently.
 */
enum ColearnStatus colearn_simulation_run(struct ColearnSimulation *s);

/**
 * Writes the configured run count and steps per run.
 *
 * # Safety
 * `s` must be a live handle; `runs` and `steps` may be null.
 */
enum ColearnStatus colearn_simulation_shape(const struct ColearnSimulation *s,
                                            size_t *runs,
                                            size_t *steps);

/**
 * Final cumulative regret of one run.
 *
 * # Safety
 * `s` must be a live handle and `out` valid for a write.
 */
enum ColearnStatus colearn_simulation_final_regret(const struct ColearnSimulation *s,
                                                   size_t run,
                                                   double *out);

/**
 * Cumulative regret after every step of one run; `out` holds `len` =
 * steps entries.
 *
 * # Safety
 * `s` must be a live handle and `out` valid for `len` elements.
 */
enum ColearnStatus colearn_simulation_cumulative_regret(const struct ColearnSimulation *s,
                                                        size_t run,
                                                        double *out,
                                                        size_t len);

/**
 * Number of runs whose regret exceeds an applicable closed-form bound.
 *
 * # Safety
 * `s` must be a live handle and `violations` valid for a write.
 */
enum ColearnStatus colearn_simulation_bound_violations(const struct ColearnSimulation *s,
                                                       size_t *violations);

/**
 * `(3/2)√T·S·G`, the single-learner bound.
 */
double colearn_ocp_bound(size_t t, double s_max, double g_max);

/**
 * `(3/2)√(TK)·S·G`, the bound for `K` independent learners.
 */
double colearn_iol_bound(size_t t, size_t k, double s_max, double g_max);

/**
 * Smallest batch length for the batch bound with insensitivity `eps`.
 */
size_t colearn_required_batch(double s_max, double eps);

/**
 * `(3/2)√B·S·G`.
 */
double colearn_batch_bound(size_t b, double s_max, double g_max);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COLEARN_H */
