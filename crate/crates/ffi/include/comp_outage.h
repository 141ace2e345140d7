#ifndef COMP_OUTAGE_H
#define COMP_OUTAGE_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from crates/ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible function.
 */
typedef enum CompStatus {
  COMP_STATUS_OK = 0,
  COMP_STATUS_NULL_POINTER = 1,
  COMP_STATUS_INVALID_ARGUMENT = 2,
  COMP_STATUS_DEGENERATE_POWERS = 3,
  COMP_STATUS_ILL_CONDITIONED = 4,
  COMP_STATUS_NO_SOLUTION = 5,
  COMP_STATUS_ZERO_OBJECTIVE = 6,
  COMP_STATUS_PANIC = 7,
} CompStatus;

/**
 * Selection criterion for [`comp_select_best_set`].
 */
typedef enum CompCriterion {
  COMP_CRITERION_GOODPUT = 0,
  COMP_CRITERION_FIXED_OUTAGE = 1,
} CompCriterion;

/**
 * Opaque link: serving powers, interferer powers and noise.
 */
typedef struct CompLink CompLink;

/**
 * Opaque result of [`comp_select_best_set`].
 */
typedef struct CompSetSelection CompSetSelection;

/**
 * Numerical-conditioning policy; obtain defaults from
 * [`comp_conditioning_default`].
 */
typedef struct CompConditioning {
  double min_relative_gap;
  bool perturb;
  double cancellation_limit;
  bool allow_fallback;
  size_t fallback_samples;
} CompConditioning;

typedef struct CompConditioningReport {
  double min_relative_gap;
  bool perturbed;
  bool fell_back_to_oracle;
  double cancellation_ratio;
} CompConditioningReport;

typedef struct CompRateOptimum {
  double gamma_star;
  double rate_star;
  double goodput;
  double outage_at_optimum;
  bool saturated;
  bool fell_back_to_oracle;
} CompRateOptimum;

typedef struct CompFixedOutage {
  double gamma_o;
  double capacity;
  double outage_at_gamma_o;
  bool fell_back_to_oracle;
} CompFixedOutage;

typedef struct CompCandidateScore {
  size_t size;
  double goodput;
  double spectral_efficiency;
  double gamma;
  double outage;
  bool saturated;
  bool fell_back_to_oracle;
} CompCandidateScore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Default conditioning policy.
 */
struct CompConditioning comp_conditioning_default(void);

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *comp_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *comp_version(void);

/**
 * Creates a link handle.
 *
 * # Safety
 * `serving` and `interferers` must point to `n_serving` and
 * `n_interferers` doubles (either may be null when its length is 0).
 * `out` must be a valid pointer.
 */
enum CompStatus comp_link_new(const double *serving,
                              size_t n_serving,
                              const double *interferers,
                              size_t n_interferers,
                              double noise_power,
                              struct CompLink **out);

/**
 * Releases a link handle; null is ignored.
 *
 * # Safety
 * `link` must come from [`comp_link_new`] and not be used afterwards.
 */
void comp_link_free(struct CompLink *link);

/**
 * Outage probability `P(SINR <= gamma)` of a link.
 *
 * # Safety
 * `link` and `out_probability` must be valid; `conditioning` and
 * `out_report` may be null (defaults / not reported).
 */
enum CompStatus comp_outage_probability(const struct CompLink *link,
                                        double gamma,
                                        const struct CompConditioning *conditioning,
                                        double *out_probability,
                                        struct CompConditioningReport *out_report);

/**
 * Outage of a single-server link by direct evaluation.
 *
 * # Safety
 * `interferers` must point to `n_interferers` doubles; `out` must be valid.
 */
enum CompStatus comp_siso_outage(double serving_power,
                                 const double *interferers,
                                 size_t n_interferers,
                                 double noise_power,
                                 double gamma,
                                 double *out);

/**
 * `P(sum_n H_n > x)` for independent exponentials with the given means.
 *
 * # Safety
 * `powers` must point to `n` doubles; `out` must be valid.
 */
enum CompStatus comp_gen_chi2_ccdf(const double *powers, size_t n, double x, double *out);

/**
 * Density of `sum_n H_n` at `x`.
 *
 * # Safety
 * `powers` must point to `n` doubles; `out` must be valid.
 */
enum CompStatus comp_gen_chi2_pdf(const double *powers, size_t n, double x, double *out);

/**
 * Goodput-maximising threshold over `[gamma_lo, gamma_hi]` with the default
 * grid and refinement.
 *
 * # Safety
 * `link` and `out` must be valid.
 */
enum CompStatus comp_maximize_goodput(const struct CompLink *link,
                                      double gamma_lo,
                                      double gamma_hi,
                                      struct CompRateOptimum *out);

/**
 * Threshold reaching outage `target` and the matching capacity with outage.
 *
 * # Safety
 * `link` and `out` must be valid.
 */
enum CompStatus comp_capacity_at_fixed_outage(const struct CompLink *link,
                                              double target,
                                              double gamma_cap,
                                              struct CompFixedOutage *out);

/**
 * Best nested cooperating set among the `K` strongest of `powers_desc`
 * (sorted descending), `K = 1..=n_max`. Station ids are array indices.
 * `target` is used only with [`CompCriterion::FixedOutage`].
 *
 * # Safety
 * `powers_desc` must point to `n` doubles; `out` must be valid.
 */
enum CompStatus comp_select_best_set(const double *powers_desc,
                                     size_t n,
                                     double noise_power,
                                     size_t n_max,
                                     enum CompCriterion criterion,
                                     double target,
                                     struct CompSetSelection **out);

/**
 * Size `N*` of the chosen set; 0 for a null handle.
 *
 * # Safety
 * `sel` must be null or come from [`comp_select_best_set`].
 */
size_t comp_selection_size(const struct CompSetSelection *sel);

/**
 * Per-BS spectral efficiency of the chosen set; NaN for a null handle.
 *
 * # Safety
 * `sel` must be null or come from [`comp_select_best_set`].
 */
double comp_selection_spectral_efficiency(const struct CompSetSelection *sel);

/**
 * Number of evaluated candidates (set sizes `1..=count`).
 *
 * # Safety
 * `sel` must be null or come from [`comp_select_best_set`].
 */
size_t comp_selection_candidate_count(const struct CompSetSelection *sel);

/**
 * Score of the candidate with `size` stations.
 *
 * # Safety
 * `sel` and `out` must be valid.
 */
enum CompStatus comp_selection_candidate(const struct CompSetSelection *sel,
                                         size_t size,
                                         struct CompCandidateScore *out);

/**
 * Releases a selection handle; null is ignored.
 *
 * # Safety
 * `sel` must come from [`comp_select_best_set`] and not be used afterwards.
 */
void comp_selection_free(struct CompSetSelection *sel);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COMP_OUTAGE_H */
