#ifndef SEQROC_H
#define SEQROC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every API function.
 */
#define SEQROC_OK 0

#define SEQROC_ERR_NULL_POINTER 1

#define SEQROC_ERR_INVALID_ARGUMENT 2

#define SEQROC_ERR_NUMERICAL 3

#define SEQROC_ERR_DEGENERATE_DATA 4

/**
 * Spending families for seqroc_solve_boundaries.
 */
#define SEQROC_SPENDING_OBF 0

#define SEQROC_SPENDING_POCOCK 1

/**
 * Stopping modes for seqroc_solve_boundaries.
 */
#define SEQROC_STOPPING_BOTH 0

#define SEQROC_STOPPING_FUTILITY_ONLY 1

#define SEQROC_STOPPING_EFFICACY_ONLY 2

/**
 * Decisions reported by seqroc_two_stage_test.
 */
#define SEQROC_DECISION_CONTINUE 0

#define SEQROC_DECISION_REJECT 1

#define SEQROC_DECISION_ACCEPT 2

#define SEQROC_DECISION_REJECT_FINAL 3

#define SEQROC_DECISION_ACCEPT_FINAL 4

/**
 * Opaque case-control panel handle.
 */
typedef struct SeqrocPanel SeqrocPanel;

/**
 * Solved two-stage boundaries. Infinite bounds are IEEE infinities.
 */
typedef struct SeqrocBoundaries {
  double a1;
  double b1;
  double b2;
  double alpha1;
  double alpha2;
  double rho;
  double delta1;
} SeqrocBoundaries;

/**
 * Result of a two-stage test through the C ABI.
 */
typedef struct SeqrocTestResult {
  /**
   * 1 if the test stopped at stage 1, 2 otherwise.
   */
  int32_t final_stage;
  /**
   * One of the SEQROC_DECISION_* codes (the terminal decision).
   */
  int32_t decision;
  double z1;
  /**
   * NaN when the test stopped early.
   */
  double z2;
  double roc_full;
  /**
   * NaN for single-panel tests.
   */
  double roc_restricted;
  double sigma_delta;
} SeqrocTestResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Solves symmetric two-stage alpha-spending boundaries.
 *
 * # Safety
 * `out` must be a valid pointer to a SeqrocBoundaries.
 */
int32_t seqroc_solve_boundaries(double alpha,
                                double info_frac,
                                int32_t spending,
                                int32_t stopping,
                                struct SeqrocBoundaries *out);

/**
 * Upper-orthant probability P(Z1 > h, Z2 > k) at correlation rho.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
int32_t seqroc_bvn_upper(double h, double k, double rho, double *out);

/**
 * Closed-form ROC(t) for the equal-covariance MVN model. `mu` has
 * length `dim`; `cov` is row-major dim x dim.
 *
 * # Safety
 * `mu` and `cov` must point to dim and dim*dim readable doubles; `out`
 * must be a valid pointer.
 */
int32_t seqroc_closed_form_roc(const double *mu,
                               const double *cov,
                               uintptr_t dim,
                               double t,
                               double *out);

/**
 * Closed-form expected number of markers evaluated by the rotation
 * policy (stopping probability p, volume v, kappa groups).
 *
 * # Safety
 * `out` must be a valid pointer.
 */
int32_t seqroc_expected_evaluated(double p, uint32_t v, uintptr_t kappa, double *out);

/**
 * Builds a panel from a row-major values matrix (n_rows x n_markers)
 * and 0/1 labels. Returns NULL on invalid input.
 *
 * # Safety
 * `values` must point to n_rows*n_markers doubles and `labels` to
 * n_rows bytes.
 */
struct SeqrocPanel *seqroc_panel_new(const double *values,
                                     uintptr_t n_rows,
                                     uintptr_t n_markers,
                                     const uint8_t *labels);

/**
 * Frees a panel created by seqroc_panel_new. NULL is a no-op.
 *
 * # Safety
 * `panel` must be NULL or a pointer returned by seqroc_panel_new that
 * has not been freed.
 */
void seqroc_panel_free(struct SeqrocPanel *panel);

/**
 * Empirical ROC(t) of one marker column of the panel.
 *
 * # Safety
 * `panel` must be a live handle; `out` a valid pointer.
 */
int32_t seqroc_empirical_roc(const struct SeqrocPanel *panel,
                             uintptr_t column,
                             double t,
                             double *out);

/**
 * Runs the two-stage incremental-value test: H0 is that the full panel
 * improves ROC(t) over the panel without `new_marker_columns` by at
 * most delta0. The stage-1 subsample is a stratified fraction lambda
 * drawn with the given seed.
 *
 * # Safety
 * `panel` must be a live handle; `new_marker_columns` must point to
 * n_new_markers readable values; `out` must be a valid pointer.
 */
int32_t seqroc_two_stage_test(const struct SeqrocPanel *panel,
                              const uintptr_t *new_marker_columns,
                              uintptr_t n_new_markers,
                              double t,
                              double delta0,
                              double lambda,
                              double alpha,
                              int32_t spending,
                              int32_t stopping,
                              uint64_t seed,
                              struct SeqrocTestResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEQROC_H */
