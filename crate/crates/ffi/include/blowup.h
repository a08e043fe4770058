#ifndef BLOWUP_H
#define BLOWUP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum BlowupStatus {
  BLOWUP_STATUS_OK = 0,
  BLOWUP_STATUS_NULL_POINTER = 1,
  BLOWUP_STATUS_DOMAIN = 2,
  BLOWUP_STATUS_SINGULAR_POINT = 3,
  BLOWUP_STATUS_RANGE = 4,
  BLOWUP_STATUS_INTEGRATION = 5,
  BLOWUP_STATUS_SEARCH_FAILURE = 6,
  BLOWUP_STATUS_DIAGNOSTIC = 7,
  BLOWUP_STATUS_INSUFFICIENT_DATA = 8,
  BLOWUP_STATUS_DEGENERATE = 9,
  BLOWUP_STATUS_MONOTONICITY = 10,
  BLOWUP_STATUS_OUT_OF_RANGE = 11,
  BLOWUP_STATUS_PANIC = 12,
} BlowupStatus;

/**
 * Opaque model parameters.
 */
typedef struct BlowupParams BlowupParams;

/**
 * Opaque refined profile.
 */
typedef struct BlowupSolution BlowupSolution;

/**
 * Model constants for one exponent.
 */
typedef struct BlowupConstants {
  uint32_t p;
  double alpha;
  double b0;
  double b_inf;
  double omega;
  bool experimental;
} BlowupConstants;

/**
 * Summary of a solution handle.
 */
typedef struct BlowupSolutionInfo {
  size_t n;
  double c_n;
  double b_n;
  double mismatch;
  size_t zeros;
  double rho_min;
  double rho_max;
} BlowupSolutionInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates parameters for exponent `p` (an integer >= 6).
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle pointer.
 */
enum BlowupStatus blowup_params_new(uint32_t p, struct BlowupParams **out);

/**
 * Releases a parameter handle. Null is ignored.
 *
 * # Safety
 * `params` must come from [`blowup_params_new`] and not have been freed.
 */
void blowup_params_free(struct BlowupParams *params);

/**
 * Copies the closed-form constants into `out`.
 *
 * # Safety
 * `params` must be a live handle and `out` valid for writes.
 */
enum BlowupStatus blowup_params_constants(const struct BlowupParams *params,
                                          struct BlowupConstants *out);

/**
 * Predicted limits of `c_{n+1}/c_n` and `(b_{n+1}-b_inf)/(b_inf-b_n)`.
 *
 * # Safety
 * `params` must be a live handle; `ratio_c` and `ratio_b` valid for writes.
 */
enum BlowupStatus blowup_scaling(const struct BlowupParams *params,
                                 double *ratio_c,
                                 double *ratio_b);

/**
 * `(p-1)^2 Δ(1 - 2α)`, negative for every admissible `p`.
 *
 * # Safety
 * `params` must be a live handle and `out` valid for writes.
 */
enum BlowupStatus blowup_discriminant(const struct BlowupParams *params, double *out);

/**
 * Solves for the profile `u_n` (`n >= 1`). Pass `rho_mid <= 0` for the
 * default matching point and `rtol <= 0` or `atol <= 0` for the default
 * tolerances.
 *
 * # Safety
 * `params` must be a live handle and `out` valid for writes.
 */
enum BlowupStatus blowup_find_solution(const struct BlowupParams *params,
                                       size_t n,
                                       double rho_mid,
                                       double rtol,
                                       double atol,
                                       struct BlowupSolution **out);

/**
 * Releases a solution handle. Null is ignored.
 *
 * # Safety
 * `sol` must come from [`blowup_find_solution`] and not have been freed.
 */
void blowup_solution_free(struct BlowupSolution *sol);

/**
 * Copies the shooting parameters and covered range of `sol`.
 *
 * # Safety
 * `sol` must be a live handle and `out` valid for writes.
 */
enum BlowupStatus blowup_solution_info(const struct BlowupSolution *sol,
                                       struct BlowupSolutionInfo *out);

/**
 * Evaluates `u` and `u'` of the profile at `rho`.
 *
 * # Safety
 * `sol` must be a live handle; `u` and `du` valid for writes.
 */
enum BlowupStatus blowup_solution_eval(const struct BlowupSolution *sol,
                                       double rho,
                                       double *u,
                                       double *du);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL, or
 * 0 when there is no error.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes of writes.
 */
size_t blowup_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *blowup_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BLOWUP_H */
