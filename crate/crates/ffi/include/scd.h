#ifndef SCD_H
#define SCD_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes; the first four match the command-line exit codes.
 */
typedef enum ScdStatus {
  SCD_STATUS_OK = 0,
  /**
   * A bound, contract or digest check failed.
   */
  SCD_STATUS_VIOLATION = 1,
  /**
   * A size guard was exceeded.
   */
  SCD_STATUS_GUARD = 2,
  /**
   * Malformed or invalid input.
   */
  SCD_STATUS_INPUT = 3,
  SCD_STATUS_NULL_POINTER = 4,
  /**
   * A panic was caught at the boundary.
   */
  SCD_STATUS_INTERNAL = 5,
} ScdStatus;

/**
 * A validated problem instance.
 */
typedef struct ScdInstance ScdInstance;

/**
 * The outcome of one run.
 */
typedef struct ScdTrace ScdTrace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Load an instance file.
 *
 * # Safety
 * `path` must be a nul-terminated string and `out` a valid pointer.
 */
enum ScdStatus scd_instance_load(const char *path, struct ScdInstance **out);

/**
 * Parse an instance from JSON text.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a valid pointer.
 */
enum ScdStatus scd_instance_from_json(const char *json, struct ScdInstance **out);

/**
 * # Safety
 * `inst` must come from this library and not be used afterwards; null is ignored.
 */
void scd_instance_free(struct ScdInstance *inst);

/**
 * Element, set and request counts. Any output pointer may be null.
 *
 * # Safety
 * `inst` must be a live instance handle; non-null outputs must be valid.
 */
enum ScdStatus scd_instance_counts(const struct ScdInstance *inst,
                                   size_t *elements,
                                   size_t *sets,
                                   size_t *requests);

/**
 * Run an online algorithm (`onf`, `onr-request`, `onr-element`, `counter`, ...).
 *
 * # Safety
 * Pointers must be valid; `algo` must be nul-terminated.
 */
enum ScdStatus scd_run(const struct ScdInstance *inst,
                       const char *algo,
                       double dt,
                       uint64_t seed,
                       struct ScdTrace **out);

/**
 * Run an algorithm against the adaptive lower-bound family of the given depth.
 * When `realized` is not null it receives the instance the run produced.
 *
 * # Safety
 * Pointers must be valid; `algo` must be nul-terminated.
 */
enum ScdStatus scd_run_lower_bound(uint32_t depth,
                                   const char *algo,
                                   double dt,
                                   struct ScdTrace **out,
                                   struct ScdInstance **realized);

/**
 * Solve the offline optimum exactly; fails with `Guard` on large instances.
 *
 * # Safety
 * Pointers must be valid.
 */
enum ScdStatus scd_solve_opt(const struct ScdInstance *inst, struct ScdTrace **out);

/**
 * Buying, delay (including penalties) and total cost. Any output may be null.
 *
 * # Safety
 * `trace` must be a live handle; non-null outputs must be valid.
 */
enum ScdStatus scd_trace_costs(const struct ScdTrace *trace,
                               double *buy,
                               double *delay,
                               double *total);

/**
 * Serialize a trace; release the string with [`scd_string_free`].
 *
 * # Safety
 * Pointers must be valid.
 */
enum ScdStatus scd_trace_to_json(const struct ScdTrace *trace, char **out);

/**
 * `alg` total over `opt` total; `Violation` if the traces belong to different instances.
 *
 * # Safety
 * Pointers must be valid.
 */
enum ScdStatus scd_competitive_ratio(const struct ScdTrace *alg,
                                     const struct ScdTrace *opt,
                                     double *out);

/**
 * # Safety
 * `trace` must come from this library and not be used afterwards; null is ignored.
 */
void scd_trace_free(struct ScdTrace *trace);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards; null is ignored.
 */
void scd_string_free(char *s);

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *scd_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCD_H */
