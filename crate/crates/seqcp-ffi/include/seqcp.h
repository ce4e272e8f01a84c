/* C interface of the seqcp sequential change point engine. */

#ifndef SEQCP_H
#define SEQCP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Kernel selector (pass as the integer value).
 */
typedef enum SeqcpKernel {
  SEQCP_KERNEL_DOM = 0,
  SEQCP_KERNEL_WILCOXON = 1,
  SEQCP_KERNEL_SYMMETRIC_SUM = 2,
} SeqcpKernel;

/**
 * Normalization selector.
 */
typedef enum SeqcpNormalization {
  SEQCP_NORMALIZATION_HOMOSCEDASTIC = 0,
  SEQCP_NORMALIZATION_HETEROSCEDASTIC = 1,
} SeqcpNormalization;

/**
 * Monitoring scheme selector.
 */
typedef enum SeqcpScheme {
  SEQCP_SCHEME_CUSUM = 0,
  SEQCP_SCHEME_MMOSUM = 1,
  SEQCP_SCHEME_PAGE_CUSUM = 2,
} SeqcpScheme;

/**
 * Result code of every FFI call.
 */
typedef enum SeqcpStatus {
  SEQCP_OK = 0,
  SEQCP_NULL_POINTER = 1,
  SEQCP_INVALID_ARGUMENT = 2,
  SEQCP_INSUFFICIENT_DATA = 3,
  SEQCP_NON_FINITE_OBSERVATION = 4,
  SEQCP_INTERNAL_ERROR = 5,
} SeqcpStatus;

/**
 * Opaque monitor handle.
 */
typedef struct SeqcpMonitor SeqcpMonitor;

/**
 * Decision at one monitoring time. When `rejected` is set, `stopped_at`
 * holds the (frozen) stopping time and `stat`/`margin` are NaN; otherwise
 * `stat` is the normalized statistic and `margin` its distance from the
 * critical value.
 */
typedef struct SeqcpDecision {
  bool rejected;
  uintptr_t stopped_at;
  double stat;
  double margin;
} SeqcpDecision;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Create a monitor over a change-free historic sample. `burn_in = 0`
 * selects the default of ceil(sqrt(len)). On success `*out` owns the
 * handle.
 *
 * # Safety
 * `historic` must point to `len` readable doubles and `out` must be a valid
 * location for one pointer.
 */
enum SeqcpStatus seqcp_monitor_new(const double *historic,
                                   uintptr_t len,
                                   int32_t kernel,
                                   int32_t scheme,
                                   double gamma,
                                   double mmosum_b,
                                   uintptr_t burn_in,
                                   int32_t normalization,
                                   double c_alpha,
                                   struct SeqcpMonitor **out);

/**
 * Like `seqcp_monitor_new`, but with caller-supplied variances of the two
 * linear kernel parts (e.g. long-run variances for dependent data).
 *
 * # Safety
 * Same contract as [`seqcp_monitor_new`].
 */
enum SeqcpStatus seqcp_monitor_new_with_variances(const double *historic,
                                                  uintptr_t len,
                                                  int32_t kernel,
                                                  int32_t scheme,
                                                  double gamma,
                                                  double mmosum_b,
                                                  uintptr_t burn_in,
                                                  int32_t normalization,
                                                  double c_alpha,
                                                  double sigma1_sq,
                                                  double sigma2_sq,
                                                  struct SeqcpMonitor **out);

/**
 * Feed one observation. After an alarm the monitor is frozen and keeps
 * returning the stored stopping time.
 *
 * # Safety
 * `monitor` must be a live handle from a constructor; `decision` must be a
 * valid location for one `SeqcpDecision`.
 */
enum SeqcpStatus seqcp_monitor_step(struct SeqcpMonitor *monitor,
                                    double x,
                                    struct SeqcpDecision *decision);

/**
 * Query the stopping time without feeding data. `*stopped` is false while
 * the monitor is still running.
 *
 * # Safety
 * All pointers must be valid; `monitor` must be a live handle.
 */
enum SeqcpStatus seqcp_monitor_stopped_at(const struct SeqcpMonitor *monitor,
                                          bool *stopped,
                                          uintptr_t *at);

/**
 * Release a handle. Passing NULL is a no-op.
 *
 * # Safety
 * `monitor` must be NULL or a handle not yet freed.
 */
void seqcp_monitor_free(struct SeqcpMonitor *monitor);

/**
 * Simulate the limit distribution of the given scheme and return the
 * critical value at level `alpha`. This runs a full Monte-Carlo simulation
 * (`grid_points` x `replications` Gaussian increments), so cache the result
 * on the caller side.
 *
 * # Safety
 * `out` must be a valid location for one double.
 */
enum SeqcpStatus seqcp_critical_value(int32_t scheme,
                                      double gamma,
                                      double b,
                                      int32_t normalization,
                                      uintptr_t grid_points,
                                      uintptr_t replications,
                                      uint64_t seed,
                                      double alpha,
                                      double *out);

/**
 * Static description of a status code (never NULL).
 */
const char *seqcp_status_message(enum SeqcpStatus status);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SEQCP_H */
