#ifndef TAXREFORM_H
#define TAXREFORM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Zero is success.
 */
typedef enum TrStatus {
  TR_STATUS_OK = 0,
  TR_STATUS_NULL_POINTER = 1,
  TR_STATUS_INVALID_RECORD = 2,
  TR_STATUS_INVALID_SYSTEM = 3,
  TR_STATUS_INVALID_FACTOR = 4,
  TR_STATUS_RATE_AT_OR_ABOVE_ONE = 5,
  TR_STATUS_ZERO_CONTRAST = 6,
  TR_STATUS_DEGENERATE = 7,
  TR_STATUS_IO = 8,
  TR_STATUS_INVALID_UTF8 = 9,
  TR_STATUS_PANIC = 10,
  TR_STATUS_OTHER = 11,
} TrStatus;

/**
 * Highest national bracket in which a filer is liable.
 */
typedef enum TrBracket {
  TR_BRACKET_NONE = 0,
  TR_BRACKET_BOTTOM = 1,
  TR_BRACKET_MIDDLE = 2,
  TR_BRACKET_TOP = 3,
} TrBracket;

/**
 * Opaque tax system.
 */
typedef struct TrTaxSystem TrTaxSystem;

/**
 * One person-year of income in DKK. Spouse fields are read only when
 * `married` is nonzero; `regional_rate` only when `has_regional_rate` is nonzero.
 */
typedef struct TrIncome {
  double li;
  double ci;
  double d;
  uint8_t married;
  double spouse_li;
  double spouse_ci;
  double spouse_d;
  uint8_t has_regional_rate;
  double regional_rate;
} TrIncome;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the next
 * failing call on the same thread.
 */
const char *tr_last_error_message(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *tr_version(void);

/**
 * Built-in system for year "1986" or "1987".
 *
 * # Safety
 * `year` must be a nul-terminated string; `out` must be writable.
 */
enum TrStatus tr_system_builtin(const char *year, struct TrTaxSystem **out);

/**
 * System parsed from the TOML parameter format.
 *
 * # Safety
 * `text` must be a nul-terminated string; `out` must be writable.
 */
enum TrStatus tr_system_from_params(const char *text, struct TrTaxSystem **out);

/**
 * Copy of `sys` with every DKK amount divided by `factor`.
 *
 * # Safety
 * `sys` must come from this library; `out` must be writable.
 */
enum TrStatus tr_system_deflate(const struct TrTaxSystem *sys,
                                double factor,
                                struct TrTaxSystem **out);

/**
 * Releases a system. Null is ignored.
 *
 * # Safety
 * `sys` must come from this library and not be used afterwards.
 */
void tr_system_free(struct TrTaxSystem *sys);

/**
 * National plus regional tax.
 *
 * # Safety
 * Pointers must be valid; `out` must be writable.
 */
enum TrStatus tr_tax_liability(const struct TrTaxSystem *sys,
                               const struct TrIncome *income,
                               double *out);

/**
 * Marginal rate on labor income by a 100 DKK finite difference.
 *
 * # Safety
 * Pointers must be valid; `out` must be writable.
 */
enum TrStatus tr_effective_mtr(const struct TrTaxSystem *sys,
                               const struct TrIncome *income,
                               double *out);

/**
 * Sum of statutory rates of the brackets in which the filer is liable, capped.
 *
 * # Safety
 * Pointers must be valid; `out` must be writable.
 */
enum TrStatus tr_statutory_mtr(const struct TrTaxSystem *sys,
                               const struct TrIncome *income,
                               double *out);

/**
 * # Safety
 * Pointers must be valid; `out` must be writable.
 */
enum TrStatus tr_bracket_location(const struct TrTaxSystem *sys,
                                  const struct TrIncome *income,
                                  enum TrBracket *out);

/**
 * `log(1 - tau_after) - log(1 - tau_before)` at the given income.
 *
 * # Safety
 * Pointers must be valid; `out` must be writable.
 */
enum TrStatus tr_mechanical_change(const struct TrTaxSystem *before,
                                   const struct TrTaxSystem *after,
                                   const struct TrIncome *income,
                                   double *out);

/**
 * Elasticity and standard error from a TOT coefficient and the mean
 * mechanical changes of the two arms.
 *
 * # Safety
 * `epsilon` and `se` must be writable.
 */
enum TrStatus tr_elasticity(double beta_tot,
                            double se_tot,
                            double delta_treated,
                            double delta_control,
                            double *epsilon,
                            double *se);

/**
 * `(mean_a - mean_b) / sqrt((sd_a^2 + sd_b^2) / 2)`; Degenerate when both sds are zero.
 *
 * # Safety
 * `out` must be writable.
 */
enum TrStatus tr_normalized_difference(double mean_a,
                                       double mean_b,
                                       double sd_a,
                                       double sd_b,
                                       double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TAXREFORM_H */
