#ifndef BECPAIR_H
#define BECPAIR_H

/* Generated by cbindgen from becpair-capi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum BecpairStatus {
  BECPAIR_STATUS_OK = 0,
  BECPAIR_STATUS_NULL_ARGUMENT = 1,
  BECPAIR_STATUS_INVALID_ARGUMENT = 2,
  BECPAIR_STATUS_PARSE_ERROR = 3,
  BECPAIR_STATUS_VALIDATION_ERROR = 4,
  BECPAIR_STATUS_CONVERGENCE_ERROR = 5,
  BECPAIR_STATUS_IO_ERROR = 6,
  BECPAIR_STATUS_INTERNAL_PANIC = 7,
} BecpairStatus;

/**
 * Opaque run configuration handle.
 */
typedef struct BecpairConfig BecpairConfig;

/**
 * Opaque two-particle pattern handle.
 */
typedef struct BecpairPattern BecpairPattern;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string; do not free.
 */
const char *becpair_version(void);

/**
 * Message of the last error on this thread, valid until the next failing
 * call on the same thread; do not free.
 */
const char *becpair_last_error(void);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must be a pointer previously returned through an out parameter of
 * this library, not yet freed, or null.
 */
void becpair_string_free(char *s);

/**
 * Parse a configuration in the `key = value unit` grammar.
 *
 * # Safety
 * `text` must be a valid nul-terminated UTF-8 string and `out_config` a
 * valid writable pointer.
 */
enum BecpairStatus becpair_config_parse(const char *text, struct BecpairConfig **out_config);

/**
 * Override one key on a parsed configuration, using the same textual
 * grammar as the file values.
 *
 * # Safety
 * `config` must be a live handle from [`becpair_config_parse`]; `key` and
 * `value` must be valid nul-terminated UTF-8 strings.
 */
enum BecpairStatus becpair_config_set(struct BecpairConfig *config,
                                      const char *key,
                                      const char *value);

/**
 * # Safety
 * `config` must be a handle from [`becpair_config_parse`] or null.
 */
void becpair_config_free(struct BecpairConfig *config);

/**
 * Run the engine to convergence and return the pattern handle.
 *
 * # Safety
 * `config` must be a live handle and `out_pattern` writable.
 */
enum BecpairStatus becpair_simulate(const struct BecpairConfig *config,
                                    struct BecpairPattern **out_pattern);

/**
 * # Safety
 * `pattern` must be a handle from [`becpair_simulate`] or null.
 */
void becpair_pattern_free(struct BecpairPattern *pattern);

/**
 * Grid dimensions of a pattern: `n_a` rows (x_A) by `n_b` columns (x_B).
 *
 * # Safety
 * All pointers must be valid.
 */
enum BecpairStatus becpair_pattern_dims(const struct BecpairPattern *pattern,
                                        uintptr_t *n_a,
                                        uintptr_t *n_b);

/**
 * Copy the row-major |psi|^2 values into `buffer` (length n_a * n_b).
 *
 * # Safety
 * `buffer` must point to at least `len` writable doubles.
 */
enum BecpairStatus becpair_pattern_values(const struct BecpairPattern *pattern,
                                          double *buffer,
                                          uintptr_t len);

/**
 * Copy one detector axis: side 0 = A, side 1 = B.
 *
 * # Safety
 * `buffer` must point to at least `len` writable doubles.
 */
enum BecpairStatus becpair_pattern_axis(const struct BecpairPattern *pattern,
                                        int side,
                                        double *buffer,
                                        uintptr_t len);

/**
 * Pattern serialized as CSV (same format the CLI writes).
 *
 * # Safety
 * `out_text` must be writable; free the result with [`becpair_string_free`].
 */
enum BecpairStatus becpair_pattern_csv(const struct BecpairPattern *pattern, char **out_text);

/**
 * Structured-text analysis report for a pattern.
 *
 * # Safety
 * `out_text` must be writable; free the result with [`becpair_string_free`].
 */
enum BecpairStatus becpair_pattern_report(const struct BecpairPattern *pattern, char **out_text);

/**
 * Conditional-slice fringe visibility on the given side (0 = A, 1 = B) at
 * detector position 0.
 *
 * # Safety
 * `out_visibility` must be writable.
 */
enum BecpairStatus becpair_pattern_conditional_visibility(const struct BecpairPattern *pattern,
                                                          int side,
                                                          double *out_visibility);

/**
 * Structured-text feasibility report for a configuration.
 *
 * # Safety
 * `out_text` must be writable; free the result with [`becpair_string_free`].
 */
enum BecpairStatus becpair_feasibility_report(const struct BecpairConfig *config, char **out_text);

/**
 * Run the timing Monte Carlo configured in `config` and return the
 * structured-text report.
 *
 * # Safety
 * `out_text` must be writable; free the result with [`becpair_string_free`].
 */
enum BecpairStatus becpair_timing_report(const struct BecpairConfig *config, char **out_text);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BECPAIR_H */
