#ifndef HDGLM_H
#define HDGLM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum HdglmStatus {
  HDGLM_STATUS_OK = 0,
  HDGLM_STATUS_NULL_POINTER = 1,
  HDGLM_STATUS_INVALID_ARGUMENT = 2,
  HDGLM_STATUS_DIMENSION_MISMATCH = 3,
  HDGLM_STATUS_NON_MONOTONE_LINK = 4,
  HDGLM_STATUS_ODD_LINK = 5,
  HDGLM_STATUS_NO_CONVERGENCE = 6,
  HDGLM_STATUS_DIVERGED = 7,
  HDGLM_STATUS_SINGULAR = 8,
  HDGLM_STATUS_NUMERIC_FAILURE = 9,
  HDGLM_STATUS_IO = 10,
  HDGLM_STATUS_PANIC = 11,
} HdglmStatus;

/**
 * Opaque dataset: row-major features, responses and optional true coefficients.
 */
typedef struct HdglmDataset HdglmDataset;

/**
 * Opaque GLM model (inverse link plus response law).
 */
typedef struct HdglmModel HdglmModel;

/**
 * State-evolution parameters.
 */
typedef struct HdglmSeParams {
  double mu;
  double sigma2;
  double eta;
} HdglmSeParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next failing call on the same thread.
 */
const char *hdglm_last_error(void);

/**
 * Builds a model from a preset name (`poisson-clippedexp`, `logistic`, ...) or `law/link`.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HdglmStatus hdglm_model_new(const char *name, struct HdglmModel **out);

/**
 * # Safety
 * `model` must come from [`hdglm_model_new`] and not be used afterwards. NULL is ignored.
 */
void hdglm_model_free(struct HdglmModel *model);

/**
 * Draws a synthetic dataset. `covariance` is `identity`, `ar1:rho`, or NULL for identity.
 *
 * # Safety
 * Pointers must be valid; `covariance` may be NULL.
 */
enum HdglmStatus hdglm_dataset_generate(const struct HdglmModel *model,
                                        size_t n,
                                        size_t p,
                                        double gamma2,
                                        uint64_t seed,
                                        const char *covariance,
                                        struct HdglmDataset **out);

/**
 * Wraps caller data: `x` is `n × p` row-major, `y` has length `n`.
 *
 * # Safety
 * `x` must hold `n*p` values and `y` `n` values.
 */
enum HdglmStatus hdglm_dataset_from_arrays(const double *x,
                                           const double *y,
                                           size_t n,
                                           size_t p,
                                           struct HdglmDataset **out);

/**
 * # Safety
 * `data` must come from this library and not be used afterwards. NULL is ignored.
 */
void hdglm_dataset_free(struct HdglmDataset *data);

/**
 * # Safety
 * Pointers must be valid.
 */
enum HdglmStatus hdglm_dataset_dims(const struct HdglmDataset *data, size_t *n, size_t *p);

/**
 * Copies the true coefficients of a synthetic dataset into `out[0..p]`.
 *
 * # Safety
 * `out` must hold `len` values.
 */
enum HdglmStatus hdglm_dataset_beta_true(const struct HdglmDataset *data, double *out, size_t len);

/**
 * `prox_{ηG}(x)` for the model's link.
 *
 * # Safety
 * Pointers must be valid.
 */
enum HdglmStatus hdglm_prox(const struct HdglmModel *model, double eta, double x, double *out);

/**
 * Surrogate-loss estimate into `beta_out[0..p]`; `converged` may be NULL.
 *
 * # Safety
 * `beta_out` must hold `len` values.
 */
enum HdglmStatus hdglm_fit(const struct HdglmModel *model,
                           const struct HdglmDataset *data,
                           double *beta_out,
                           size_t len,
                           bool *converged);

/**
 * Solves the state-evolution system (ridge form when `lambda > 0`).
 *
 * # Safety
 * Pointers must be valid.
 */
enum HdglmStatus hdglm_se_solve(const struct HdglmModel *model,
                                double kappa,
                                double gamma2,
                                double lambda,
                                size_t mc_samples,
                                uint64_t seed,
                                struct HdglmSeParams *out);

/**
 * γ̂² from the mean response of `data`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum HdglmStatus hdglm_estimate_gamma2(const struct HdglmModel *model,
                                       const struct HdglmDataset *data,
                                       size_t mc_samples,
                                       uint64_t seed,
                                       double *out);

/**
 * τ̂_j² for every column into `out[0..p]`.
 *
 * # Safety
 * `out` must hold `len` values.
 */
enum HdglmStatus hdglm_estimate_tau2(const struct HdglmDataset *data, double *out, size_t len);

/**
 * Corrected intervals `β̂_j/μ ± z σ/(√n μ τ̂_j)` for `len` coordinates.
 *
 * # Safety
 * Every array must hold `len` values.
 */
enum HdglmStatus hdglm_corrected_ci(const double *beta_hat,
                                    const double *tau2_hat,
                                    size_t len,
                                    const struct HdglmSeParams *se,
                                    double alpha,
                                    size_t n,
                                    double *lo,
                                    double *hi);

/**
 * Full pipeline: calibrate, fit, solve SE at γ̂², corrected intervals.
 * `se_out` and `gamma2_out` may be NULL.
 *
 * # Safety
 * `lo` and `hi` must hold `len` values.
 */
enum HdglmStatus hdglm_infer(const struct HdglmModel *model,
                             const struct HdglmDataset *data,
                             uint64_t seed,
                             double alpha,
                             size_t curve_samples,
                             size_t se_samples,
                             double *lo,
                             double *hi,
                             size_t len,
                             struct HdglmSeParams *se_out,
                             double *gamma2_out);

/**
 * Standard normal quantile.
 *
 * # Safety
 * `out` must be valid.
 */
enum HdglmStatus hdglm_normal_quantile(double q, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HDGLM_H */
