#ifndef EXTVAR_H
#define EXTVAR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum ExtvarStatus {
  EXTVAR_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  EXTVAR_STATUS_NULL_POINTER = 1,
  /**
   * Input failed validation (shapes, ranges, kernel rules, hypotheses).
   */
  EXTVAR_STATUS_INVALID_INPUT = 2,
  /**
   * The computation failed (e.g. infeasible separation).
   */
  EXTVAR_STATUS_RUNTIME = 3,
  /**
   * A Rust panic was caught at the boundary.
   */
  EXTVAR_STATUS_PANIC = 4,
} ExtvarStatus;

/**
 * Kernel families for [`extvar_model_new`].
 */
typedef enum ExtvarKernelKind {
  EXTVAR_KERNEL_KIND_KRONECKER = 0,
  /**
   * `param` is sigma.
   */
  EXTVAR_KERNEL_KIND_GAUSSIAN = 1,
  /**
   * `param` is the integer radius.
   */
  EXTVAR_KERNEL_KIND_RECTANGULAR = 2,
} ExtvarKernelKind;

/**
 * Initialization strategy for [`ExtvarFitParams`].
 */
typedef enum ExtvarInit {
  EXTVAR_INIT_SUBSAMPLE = 0,
  EXTVAR_INIT_PLUS_PLUS = 1,
} ExtvarInit;

typedef struct ExtvarConfig ExtvarConfig;

typedef struct ExtvarFitResult ExtvarFitResult;

/**
 * Lattice plus resolved neighborhood function.
 */
typedef struct ExtvarModel ExtvarModel;

typedef struct ExtvarSamples ExtvarSamples;

/**
 * Plain-data fit parameters; `extvar_fit_params_default` fills defaults.
 */
typedef struct ExtvarFitParams {
  size_t restarts;
  size_t max_iter;
  double rel_tol;
  double delta;
  enum ExtvarInit init;
  uint64_t seed;
} ExtvarFitParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *extvar_last_error(void);

/**
 * Build a lattice with `rank` axes of lengths `dims` and a kernel.
 *
 * # Safety
 * `dims` must point to `rank` values; `out` must be writable.
 */
enum ExtvarStatus extvar_model_new(const size_t *dims,
                                   size_t rank,
                                   enum ExtvarKernelKind kind,
                                   double param,
                                   struct ExtvarModel **out);

/**
 * Build a lattice with an explicit kernel table: `count` offsets of
 * `rank` integers each (row-major in `offsets`) with their `values`.
 *
 * # Safety
 * `dims` must hold `rank` values, `offsets` `count * rank`, `values` `count`.
 */
enum ExtvarStatus extvar_model_new_table(const size_t *dims,
                                         size_t rank,
                                         const int64_t *offsets,
                                         const double *values,
                                         size_t count,
                                         struct ExtvarModel **out);

/**
 * Number of lattice points `|I|`.
 *
 * # Safety
 * `model` must be a live handle or null.
 */
size_t extvar_model_size(const struct ExtvarModel *model);

/**
 * `Λ(k)` for an offset of `rank` integers.
 *
 * # Safety
 * `model` must be live, `offset` must hold `rank` values, `out` writable.
 */
enum ExtvarStatus extvar_model_neighborhood(const struct ExtvarModel *model,
                                            const int64_t *offset,
                                            size_t rank,
                                            double *out);

/**
 * # Safety
 * `model` must come from `extvar_model_new*` and not be freed twice.
 */
void extvar_model_free(struct ExtvarModel *model);

/**
 * Copy `n × d` row-major observations into a sample handle.
 *
 * # Safety
 * `data` must hold `n * d` values; `out` must be writable.
 */
enum ExtvarStatus extvar_samples_new(const double *data,
                                     size_t n,
                                     size_t d,
                                     struct ExtvarSamples **out);

/**
 * # Safety
 * `samples` must come from `extvar_samples_new` and not be freed twice.
 */
void extvar_samples_free(struct ExtvarSamples *samples);

/**
 * Copy `k × d` row-major centroid coordinates (flat lattice order).
 *
 * # Safety
 * `coords` must hold `k * d` values; `out` must be writable.
 */
enum ExtvarStatus extvar_config_new(const double *coords,
                                    size_t k,
                                    size_t d,
                                    struct ExtvarConfig **out);

/**
 * Number of centroids and data dimension.
 *
 * # Safety
 * `config` must be live; `k` and `d` writable.
 */
enum ExtvarStatus extvar_config_shape(const struct ExtvarConfig *config, size_t *k, size_t *d);

/**
 * Copy coordinates into `buf` (`len` must be `k * d`).
 *
 * # Safety
 * `config` must be live; `buf` must have room for `len` values.
 */
enum ExtvarStatus extvar_config_coords(const struct ExtvarConfig *config, double *buf, size_t len);

/**
 * # Safety
 * `config` must come from this library and not be freed twice.
 */
void extvar_config_free(struct ExtvarConfig *config);

/**
 * Voronoi cell (flat lattice index) of one point.
 *
 * # Safety
 * `config` must be live, `point` must hold `d` values, `out` writable.
 */
enum ExtvarStatus extvar_assign(const struct ExtvarConfig *config,
                                const double *point,
                                size_t d,
                                size_t *out);

/**
 * Empirical extended variance `V_n`.
 *
 * # Safety
 * All handles must be live; `out` writable.
 */
enum ExtvarStatus extvar_empirical_variance(const struct ExtvarModel *model,
                                            const struct ExtvarSamples *samples,
                                            const struct ExtvarConfig *config,
                                            double *out);

/**
 * Monte Carlo `V` under the uniform distribution on the cube.
 *
 * # Safety
 * Handles must be live; `estimate` and `stderr` writable.
 */
enum ExtvarStatus extvar_mc_variance_uniform(const struct ExtvarModel *model,
                                             const struct ExtvarConfig *config,
                                             size_t draws,
                                             uint64_t seed,
                                             double *estimate,
                                             double *stderr);

/**
 * Default fit parameters.
 */
struct ExtvarFitParams extvar_fit_params_default(void);

/**
 * Multi-start minimization of `V_n`.
 *
 * # Safety
 * Handles must be live, `params` readable, `out` writable.
 */
enum ExtvarStatus extvar_fit(const struct ExtvarModel *model,
                             const struct ExtvarSamples *samples,
                             const struct ExtvarFitParams *params,
                             struct ExtvarFitResult **out);

/**
 * Best `V_n` of a fit (NaN for a null handle).
 *
 * # Safety
 * `result` must be live or null.
 */
double extvar_fit_result_best_vn(const struct ExtvarFitResult *result);

/**
 * New configuration handle holding the best centroids of a fit.
 *
 * # Safety
 * `result` must be live; `out` writable.
 */
enum ExtvarStatus extvar_fit_result_config(const struct ExtvarFitResult *result,
                                           struct ExtvarConfig **out);

/**
 * # Safety
 * `result` must come from `extvar_fit` and not be freed twice.
 */
void extvar_fit_result_free(struct ExtvarFitResult *result);

/**
 * `(|I| − 1)(2α/δ + α)(√2)^{d−1}`, requiring `0 < α < δ/2`.
 *
 * # Safety
 * `out` must be writable.
 */
enum ExtvarStatus extvar_lemma1_bound(double alpha,
                                      double delta,
                                      size_t d,
                                      size_t card,
                                      double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EXTVAR_H */
