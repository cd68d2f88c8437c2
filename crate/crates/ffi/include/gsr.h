#ifndef GSR_H
#define GSR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GsrStatus {
  GSR_STATUS_OK = 0,
  GSR_STATUS_NULL_POINTER = 1,
  /**
   * Argument outside the model's domain (zero shift, `r >= A`, ...).
   */
  GSR_STATUS_DOMAIN = 2,
  GSR_STATUS_CONFIGURATION = 3,
  GSR_STATUS_NUMERICAL = 4,
  GSR_STATUS_INSUFFICIENT_SAMPLES = 5,
  GSR_STATUS_PANIC = 6,
} GsrStatus;

/**
 * Evaluated design. Opaque to C.
 */
typedef struct GsrReport GsrReport;

/**
 * Scalar part of a report. `sadd_argmax` is -1 when the supremum is the
 * steady-state limit.
 */
typedef struct GsrSummary {
  double arl;
  double add0;
  double sadd;
  int64_t sadd_argmax;
  double iadd;
  double riadd;
  double stadd;
  double lower_bound;
  double steady_state_add;
} GsrSummary;

typedef struct GsrDesign {
  double r_star;
  double a_star;
  double sadd;
  double lower_bound;
  double gap;
  double arl_achieved;
} GsrDesign;

typedef struct GsrEstimate {
  double estimate;
  double std_error;
  uint64_t effective_replications;
} GsrEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next call into this library from the same thread.
 */
const char *gsr_last_error_message(void);

/**
 * Limiting average exponential overshoot for shift `mu`.
 *
 * # Safety
 * `out` must be null or point to writable memory for one `double`.
 */
enum GsrStatus gsr_xi(double mu, double *out);

/**
 * Control limit giving ARL `gamma` at headstart `r`. A zero `resolution`
 * selects the default.
 *
 * # Safety
 * `limit_out` and `arl_out` must be null or writable.
 */
enum GsrStatus gsr_calibrate(double mu,
                             double r,
                             double gamma,
                             double rel_tol,
                             size_t resolution,
                             double *limit_out,
                             double *arl_out);

/**
 * Evaluate the design `(mu, r, limit)`. On success `*out` owns a new report.
 *
 * # Safety
 * `out` must be null or writable.
 */
enum GsrStatus gsr_report_evaluate(double mu,
                                   double r,
                                   double limit,
                                   size_t resolution,
                                   struct GsrReport **out);

/**
 * Release a report. Null is ignored.
 *
 * # Safety
 * `report` must come from [`gsr_report_evaluate`] and not be freed twice.
 */
void gsr_report_free(struct GsrReport *report);

/**
 * # Safety
 * `report` must be a live handle; `out` must be null or writable.
 */
enum GsrStatus gsr_report_summary(const struct GsrReport *report, struct GsrSummary *out);

/**
 * Number of computed `ADD_k` values, or 0 for a null handle.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
size_t gsr_report_profile_len(const struct GsrReport *report);

/**
 * Copy up to `len` entries of `ADD_k` and `P_inf(T > k)`. Either output may
 * be null to skip it. `*written` receives the number of entries copied.
 *
 * # Safety
 * Non-null outputs must hold `len` doubles; `written` must be writable.
 */
enum GsrStatus gsr_report_profile(const struct GsrReport *report,
                                  double *add_out,
                                  double *survival_out,
                                  size_t len,
                                  size_t *written);

/**
 * Optimal headstart and limit at ARL `gamma`.
 *
 * # Safety
 * `out` must be null or writable.
 */
enum GsrStatus gsr_optimize(double mu, double gamma, size_t resolution, struct GsrDesign *out);

/**
 * Monte Carlo estimate of the ARL (`change_point < 0`) or of `ADD_k` with
 * the change after sample `change_point`.
 *
 * # Safety
 * `out` must be null or writable.
 */
enum GsrStatus gsr_simulate(double mu,
                            double r,
                            double limit,
                            int64_t change_point,
                            uint64_t replications,
                            uint64_t seed,
                            struct GsrEstimate *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GSR_H */
