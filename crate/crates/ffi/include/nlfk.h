#ifndef NLFK_H
#define NLFK_H

#include <stddef.h>
#include <stdint.h>

typedef enum NlfkStatus {
  NLFK_STATUS_OK = 0,
  NLFK_STATUS_NULL_POINTER = 1,
  NLFK_STATUS_INVALID_CONFIG = 2,
  /**
   * A numerical guard tripped (CFL, rank deficiency, non-finite values).
   */
  NLFK_STATUS_NUMERICAL = 3,
  NLFK_STATUS_INVALID_ARGUMENT = 4,
  NLFK_STATUS_PANIC = 5,
} NlfkStatus;

typedef enum NlfkMethod {
  NLFK_METHOD_BRUTE_FORCE = 0,
  NLFK_METHOD_MARKOVIAN = 1,
} NlfkMethod;

/**
 * Opaque problem handle.
 */
typedef struct NlfkProblem NlfkProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next nlfk call on the same thread.
 */
const char *nlfk_last_error_message(void);

/**
 * Build a problem from scenario TOML text.
 *
 * # Safety
 * `config` must be a NUL-terminated string and `out` a valid pointer.
 */
enum NlfkStatus nlfk_problem_from_config(const char *config, struct NlfkProblem **out);

/**
 * # Safety
 * `problem` must come from [`nlfk_problem_from_config`] and not be freed
 * yet; null is ignored.
 */
void nlfk_problem_free(struct NlfkProblem *problem);

/**
 * # Safety
 * `problem` must be a live handle and `out` a valid pointer.
 */
enum NlfkStatus nlfk_problem_dim(const struct NlfkProblem *problem, size_t *out);

/**
 * Monte Carlo value at `(t, x)` with the scenario's blocks or state bins.
 *
 * # Safety
 * `problem` must be a live handle, `x` must point to `dim` doubles and
 * `value`, `std_error` must be valid pointers.
 */
enum NlfkStatus nlfk_value(const struct NlfkProblem *problem,
                           enum NlfkMethod method,
                           double t,
                           const double *x,
                           size_t dim,
                           size_t paths,
                           uint64_t seed,
                           double *value,
                           double *std_error);

/**
 * Finite-difference value at `(t, x)` on the scenario's grid.
 *
 * # Safety
 * `problem` must be a live handle, `x` must point to `dim` doubles and
 * `value` must be a valid pointer.
 */
enum NlfkStatus nlfk_fd_probe(const struct NlfkProblem *problem,
                              double t,
                              const double *x,
                              size_t dim,
                              double *value);

/**
 * Principal square root of a symmetric PSD `n x n` matrix, row-major.
 *
 * # Safety
 * `a` and `out` must each point to `n * n` doubles.
 */
enum NlfkStatus nlfk_psd_sqrt(const double *a, size_t n, double *out);

/**
 * Run a scenario file and write its artifacts into `out_dir`. `exit_code`
 * receives the CLI exit code (0 pass, 1 fail, 2 config, 3 numerical).
 * A negative `seed` keeps the config seed.
 *
 * # Safety
 * `config_path`, `out_dir` must be NUL-terminated strings and `exit_code`
 * a valid pointer.
 */
enum NlfkStatus nlfk_run_scenario(const char *config_path,
                                  const char *out_dir,
                                  int64_t seed,
                                  int32_t *exit_code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NLFK_H */
