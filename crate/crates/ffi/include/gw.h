#ifndef GW_H
#define GW_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GwStatus {
  GW_STATUS_OK = 0,
  GW_STATUS_NULL_POINTER = 1,
  GW_STATUS_INVALID_ARGUMENT = 2,
  GW_STATUS_INVALID_DISTRIBUTION = 3,
  GW_STATUS_INVALID_DATA = 4,
  GW_STATUS_NO_CONVERGENCE = 5,
  GW_STATUS_INFEASIBLE = 6,
  GW_STATUS_RETRIES_EXHAUSTED = 7,
  GW_STATUS_POPULATION_EXPLOSION = 8,
  GW_STATUS_BUFFER_TOO_SMALL = 9,
  GW_STATUS_PANIC = 10,
} GwStatus;

typedef enum GwHeydeVariant {
  GW_HEYDE_VARIANT_AS_PRINTED = 0,
  GW_HEYDE_VARIANT_CUMULATIVE = 1,
  GW_HEYDE_VARIANT_CUMULATIVE_PARENTS = 2,
} GwHeydeVariant;

typedef enum GwGibbsPrior {
  /**
   * Agnostic Dirichlet (variant A) over {0..k_trunc}.
   */
  GW_GIBBS_PRIOR_DIRICHLET = 0,
  /**
   * DP(a, base); a null base means the agnostic Poisson.
   */
  GW_GIBBS_PRIOR_DP = 1,
} GwGibbsPrior;

/**
 * Opaque offspring law.
 */
typedef struct GwOffspring GwOffspring;

/**
 * Opaque series of generation totals.
 */
typedef struct GwSeries GwSeries;

/**
 * Sampler settings for [`gw_gibbs_mean`]. Start from [`gw_gibbs_options_default`].
 */
typedef struct GwGibbsOptions {
  /**
   * A `GwGibbsPrior` value.
   */
  int32_t prior;
  double a;
  size_t k_trunc;
  size_t iterations;
  size_t burn_in;
  uint64_t max_tries;
  /**
   * Nonzero selects exact imputation instead of accept-reject.
   */
  int32_t exact_imputation;
  uint64_t seed;
  uint64_t stream;
} GwGibbsOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next call into this library on the same thread.
 */
const char *gw_last_error_message(void);

/**
 * Parse `poisson:<λ>`, `geometric:<p>`, `finite:<p0,...>`, `poisson:agnostic`
 * or `geometric:agnostic`.
 *
 * # Safety
 * `spec` must be a nul-terminated string; `out` must be writable.
 */
enum GwStatus gw_offspring_parse(const char *spec, struct GwOffspring **out);

/**
 * Finite law from probabilities p_0..p_{len-1}.
 *
 * # Safety
 * `probs` must point to `len` doubles; `out` must be writable.
 */
enum GwStatus gw_offspring_finite(const double *probs, size_t len, struct GwOffspring **out);

/**
 * # Safety
 * `h` must come from this library and not be freed twice. Null is ignored.
 */
void gw_offspring_free(struct GwOffspring *h);

/**
 * # Safety
 * `h` must be a live handle; `out` must be writable.
 */
enum GwStatus gw_offspring_pmf(const struct GwOffspring *h, size_t j, double *out);

/**
 * # Safety
 * `h` must be a live handle; `out` must be writable.
 */
enum GwStatus gw_offspring_pgf(const struct GwOffspring *h, double s, double *out);

/**
 * # Safety
 * `h` must be a live handle; `out` must be writable.
 */
enum GwStatus gw_offspring_mean(const struct GwOffspring *h, double *out);

/**
 * Smallest root of G(q) = q. `residual` may be null.
 *
 * # Safety
 * `h` must be a live handle; `q` must be writable.
 */
enum GwStatus gw_extinction_probability(const struct GwOffspring *h,
                                        double tol,
                                        double *q,
                                        double *residual);

/**
 * Series from generation totals z_0..z_{len-1}.
 *
 * # Safety
 * `z` must point to `len` values; `out` must be writable.
 */
enum GwStatus gw_series_new(const uint64_t *z, size_t len, struct GwSeries **out);

/**
 * Simulate `generations` parent generations from `z0` ancestors.
 *
 * # Safety
 * `h` must be a live handle; `out` must be writable.
 */
enum GwStatus gw_simulate_series(const struct GwOffspring *h,
                                 uint64_t z0,
                                 size_t generations,
                                 uint64_t seed,
                                 uint64_t stream,
                                 struct GwSeries **out);

/**
 * # Safety
 * `h` must come from this library and not be freed twice. Null is ignored.
 */
void gw_series_free(struct GwSeries *h);

/**
 * Copy the totals into `buf`. `len` receives the series length even when
 * `cap` is too small (status BUFFER_TOO_SMALL); `buf` may then be null.
 *
 * # Safety
 * `h` must be a live handle; `buf` must hold `cap` values; `len` must be writable.
 */
enum GwStatus gw_series_get(const struct GwSeries *h, uint64_t *buf, size_t cap, size_t *len);

/**
 * # Safety
 * `h` must be a live handle; `out` must be writable.
 */
enum GwStatus gw_mle_mean(const struct GwSeries *h, double *out);

/**
 * Heyde's chi-square approximation to P(m > 1); `variant` is a `GwHeydeVariant`.
 *
 * # Safety
 * `h` must be a live handle; `out` must be writable.
 */
enum GwStatus gw_heyde_p_supercritical(const struct GwSeries *h, int32_t variant, double *out);

/**
 * Posterior mean of m under DP(a, base) given pooled offspring counts:
 * `counts[j]` parents had exactly j children.
 *
 * # Safety
 * `base` must be a live handle; `counts` must point to `len` values; `out` must be writable.
 */
enum GwStatus gw_dp_posterior_mean_m(const struct GwOffspring *base,
                                     double a,
                                     const uint64_t *counts,
                                     size_t len,
                                     double *out);

/**
 * Defaults: DP prior with a = 1, k_trunc 10, 2000 iterations, 500 burn-in,
 * 10^6 tries, accept-reject imputation, seed 0.
 */
struct GwGibbsOptions gw_gibbs_options_default(void);

/**
 * Blocked Gibbs sampler on totals; writes the chain mean and variance of m.
 * `base` is used by the DP prior and may be null. `m_var` may be null.
 *
 * # Safety
 * `series` must be a live handle; `options` must be valid; `m_hat` must be writable.
 */
enum GwStatus gw_gibbs_mean(const struct GwSeries *series,
                            const struct GwGibbsOptions *options,
                            const struct GwOffspring *base,
                            double *m_hat,
                            double *m_var);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GW_H */
