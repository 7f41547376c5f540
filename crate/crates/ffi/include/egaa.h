#ifndef EGAA_H
#define EGAA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EgaaRunStatus {
  EGAA_RUN_STATUS_CONVERGED = 0,
  EGAA_RUN_STATUS_MAX_ITERATIONS = 1,
  EGAA_RUN_STATUS_DIVERGED = 2,
} EgaaRunStatus;

typedef enum EgaaStatus {
  EGAA_STATUS_OK = 0,
  EGAA_STATUS_NULL_POINTER = 1,
  EGAA_STATUS_INVALID_ARGUMENT = 2,
  EGAA_STATUS_PARSE = 3,
  EGAA_STATUS_IO = 4,
  EGAA_STATUS_INTERNAL = 5,
} EgaaStatus;

typedef struct EgaaProblem EgaaProblem;

typedef struct EgaaRun EgaaRun;

// One trace row. Diagnostic fields are NaN when `has_diagnostics` is 0.
typedef struct EgaaRecord {
  size_t k;
  double f_value;
  double grad_norm;
  uint8_t has_diagnostics;
  double effective_mass;
  double delta_mass;
  double rho;
  double damping;
  double gain;
  double consistency_sum;
} EgaaRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. Owned by the library.
const char *egaa_last_error_message(void);

// Build a problem from its JSON description.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum EgaaStatus egaa_problem_from_json(const char *json, struct EgaaProblem **out);

// # Safety
// `problem` must come from `egaa_problem_from_json` and not be used afterwards.
void egaa_problem_free(struct EgaaProblem *problem);

// # Safety
// `problem` must be a live handle; `out` must be writable.
enum EgaaStatus egaa_problem_dim(const struct EgaaProblem *problem, size_t *out);

// # Safety
// `x` must hold `n` doubles; `out` must be writable.
enum EgaaStatus egaa_problem_value(const struct EgaaProblem *problem,
                                   const double *x,
                                   size_t n,
                                   double *out);

// # Safety
// `x` and `grad` must each hold `n` doubles.
enum EgaaStatus egaa_problem_gradient(const struct EgaaProblem *problem,
                                      const double *x,
                                      size_t n,
                                      double *grad);

// Run an optimizer configured by JSON from `x0`.
//
// # Safety
// `config_json` must be NUL-terminated, `x0` must hold `n` doubles and `out`
// must be writable.
enum EgaaStatus egaa_run(const struct EgaaProblem *problem,
                         const char *config_json,
                         const double *x0,
                         size_t n,
                         struct EgaaRun **out);

// # Safety
// `run` must come from `egaa_run` and not be used afterwards.
void egaa_run_free(struct EgaaRun *run);

// # Safety
// `run` must be a live handle; `out` must be writable.
enum EgaaStatus egaa_run_status(const struct EgaaRun *run, enum EgaaRunStatus *out);

// Number of records (iterations taken).
//
// # Safety
// `run` must be a live handle; `out` must be writable.
enum EgaaStatus egaa_run_len(const struct EgaaRun *run, size_t *out);

// Record `index` (0-based; its `k` is `index + 1`).
//
// # Safety
// `run` must be a live handle; `out` must be writable.
enum EgaaStatus egaa_run_record(const struct EgaaRun *run, size_t index, struct EgaaRecord *out);

// Copy the last finite iterate into `x` (`n` doubles).
//
// # Safety
// `run` must be a live handle; `x` must hold `n` doubles.
enum EgaaStatus egaa_run_final_x(const struct EgaaRun *run, double *x, size_t n);

// Write the trace CSV (timing column left empty).
//
// # Safety
// `run` must be a live handle; `path` must be NUL-terminated.
enum EgaaStatus egaa_run_write_csv(const struct EgaaRun *run, const char *path);

// Momentum coefficients from mixing coefficients; both arrays hold `m` doubles.
//
// # Safety
// `theta` and `gamma` must each hold `m` doubles.
enum EgaaStatus egaa_theta_to_gamma(const double *theta, size_t m, double *gamma);

// Inverse of [`egaa_theta_to_gamma`].
//
// # Safety
// `gamma` and `theta` must each hold `m` doubles.
enum EgaaStatus egaa_gamma_to_theta(const double *gamma, size_t m, double *theta);

// # Safety
// `gamma` must hold `m` doubles; `out` must be writable.
enum EgaaStatus egaa_effective_mass(const double *gamma, size_t m, double *out);

// Guard factor for a candidate mass. `rho` receives the raw guard value,
// `applied_rho` the factor after enforcing the growth bound and mass floor.
//
// # Safety
// `rho` and `applied_rho` must be writable.
enum EgaaStatus egaa_energy_guard(double m_curr,
                                  double m_prev,
                                  double delta_max,
                                  double mass_floor,
                                  double *rho,
                                  double *applied_rho);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EGAA_H */
