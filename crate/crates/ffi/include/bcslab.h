#ifndef BCSLAB_H
#define BCSLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BcsEquation {
  BCS_EQUATION_CLASSIC = 0,
  BCS_EQUATION_NEW = 1,
} BcsEquation;

typedef enum BcsOutcome {
  BCS_OUTCOME_CONVERGED = 0,
  BCS_OUTCOME_TRIVIAL = 1,
  BCS_OUTCOME_NOT_CONVERGED = 2,
} BcsOutcome;

/**
 * Result of a call.
 */
typedef enum BcsStatus {
  BCS_STATUS_OK = 0,
  BCS_STATUS_NULL_POINTER = 1,
  BCS_STATUS_INVALID_UTF8 = 2,
  BCS_STATUS_ARGUMENT = 3,
  BCS_STATUS_VALIDATION = 4,
  BCS_STATUS_RESOURCE = 5,
  BCS_STATUS_CONVERGENCE = 6,
  BCS_STATUS_INTERNAL = 7,
  BCS_STATUS_CONFIG = 8,
  BCS_STATUS_IO = 9,
  BCS_STATUS_BUFFER_TOO_SMALL = 10,
  BCS_STATUS_PANIC = 11,
} BcsStatus;

/**
 * Opaque handle: a validated instance with its solver and check settings.
 */
typedef struct BcsInstance BcsInstance;

/**
 * Gap iteration settings; see [`bcs_solver_options_default`].
 */
typedef struct BcsSolverOptions {
  double init;
  double damping;
  double tol;
  size_t max_iter;
} BcsSolverOptions;

/**
 * Summary of a gap solve. `dsum` and `max_correction` are NaN for the
 * classic equation.
 */
typedef struct BcsGapInfo {
  enum BcsOutcome outcome;
  bool converged;
  size_t iterations;
  double residual;
  double dsum;
  double max_correction;
} BcsGapInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next call into this library on the same thread.
 */
const char *bcs_last_error(void);

struct BcsSolverOptions bcs_solver_options_default(void);

/**
 * Build an instance from a JSON run configuration.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a writable pointer.
 */
enum BcsStatus bcs_instance_from_config_json(const char *json, struct BcsInstance **out);

/**
 * Build an instance from `modes` integer wave vectors (`3 * modes` values,
 * in units of 2π/L with L = 2π), an optional dispersion `xi` (null for
 * `|k|²`) and a row-major `modes * modes` kernel in the listed order.
 *
 * # Safety
 * The arrays must hold the stated number of elements and `out` must be
 * writable.
 */
enum BcsStatus bcs_instance_from_arrays(size_t modes,
                                        const int32_t *wave_vectors,
                                        const double *xi,
                                        const double *kernel,
                                        struct BcsInstance **out);

/**
 * # Safety
 * `instance` must come from this library and not be used afterwards.
 */
void bcs_instance_free(struct BcsInstance *instance);

/**
 * Number of modes, or 0 for a null handle.
 *
 * # Safety
 * `instance` must be null or a live handle.
 */
size_t bcs_instance_modes(const struct BcsInstance *instance);

/**
 * Write the wave vectors in internal mode order, the order used by
 * [`bcs_solve_gap`]: `3 * modes` integers.
 *
 * # Safety
 * `out` must hold `len` integers.
 */
enum BcsStatus bcs_instance_wave_vectors(const struct BcsInstance *instance,
                                         int32_t *out,
                                         size_t len);

/**
 * # Safety
 * `instance` and `options` must be valid pointers.
 */
enum BcsStatus bcs_instance_set_solver(struct BcsInstance *instance,
                                       const struct BcsSolverOptions *options);

/**
 * # Safety
 * `instance` must be a live handle.
 */
enum BcsStatus bcs_instance_set_seed(struct BcsInstance *instance, uint64_t seed);

/**
 * Solve a gap equation and write `Δ_k` in internal (sorted) mode order.
 * A solve that does not converge still fills `delta` and `info` and
 * returns [`BcsStatus::Convergence`].
 *
 * # Safety
 * `delta` must hold `len` doubles; `info` may be null.
 */
enum BcsStatus bcs_solve_gap(const struct BcsInstance *instance,
                             enum BcsEquation equation,
                             double *delta,
                             size_t len,
                             struct BcsGapInfo *info);

/**
 * Run the verification checks and return the report as JSON. Failed checks
 * are reported through `failed`, not the status.
 *
 * # Safety
 * `json` must be writable; release the string with [`bcs_string_free`].
 * `failed` may be null.
 */
enum BcsStatus bcs_verify(const struct BcsInstance *instance, char **json, size_t *failed);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void bcs_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BCSLAB_H */
