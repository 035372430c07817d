#ifndef COMCHECK_H
#define COMCHECK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ComcheckStatus {
  COMCHECK_STATUS_OK = 0,
  COMCHECK_STATUS_NULL_POINTER = 1,
  COMCHECK_STATUS_INVALID_ARGUMENT = 2,
  COMCHECK_STATUS_SCHEMA_ERROR = 3,
  COMCHECK_STATUS_PHYSICS_ABORT = 4,
  COMCHECK_STATUS_IO = 5,
  COMCHECK_STATUS_BUFFER_TOO_SMALL = 6,
  COMCHECK_STATUS_PANIC = 7,
} ComcheckStatus;

// Recorded time-series column.
typedef enum ComcheckColumn {
  COMCHECK_COLUMN_TIME = 0,
  COMCHECK_COLUMN_ENERGY = 1,
  COMCHECK_COLUMN_SIGMA_R2 = 2,
  COMCHECK_COLUMN_SIGMA_N2 = 3,
} ComcheckColumn;

typedef enum ComcheckShape {
  COMCHECK_SHAPE_SECH = 0,
  COMCHECK_SHAPE_GAUSSIAN = 1,
} ComcheckShape;

typedef enum ComcheckVerdict {
  COMCHECK_VERDICT_CONVERGED = 0,
  COMCHECK_VERDICT_UNCONVERGED = 1,
  COMCHECK_VERDICT_INCONCLUSIVE = 2,
} ComcheckVerdict;

// Completed run with its artifacts on disk.
typedef struct ComcheckRun ComcheckRun;

// MCTDHB state together with a time-independent Hamiltonian.
typedef struct ComcheckState ComcheckState;

// Scalar observables of a state.
typedef struct ComcheckObservables {
  double time;
  double energy;
  double sigma_r2;
  double sigma_n2;
} ComcheckObservables;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *comcheck_version(void);

// Length in bytes of the last error message on this thread, without the terminator.
size_t comcheck_last_error_length(void);

// Copies the last error message, NUL-terminated, into `buf` of capacity `len`.
//
// # Safety
// `buf` must point to `len` writable bytes.
enum ComcheckStatus comcheck_last_error_message(char *buf, size_t len);

// Executes a configuration file; the handle stays valid until `comcheck_run_free`.
//
// # Safety
// `config` must be a NUL-terminated string; `out` must be writable.
enum ComcheckStatus comcheck_run_config(const char *config, struct ComcheckRun **out);

// Process exit code the command-line tool would return for this run (0, 3 or 4).
//
// # Safety
// `run` must come from `comcheck_run_config`; `code` must be writable.
enum ComcheckStatus comcheck_run_exit_code(const struct ComcheckRun *run, int32_t *code);

// Number of recorded time points.
//
// # Safety
// `run` must come from `comcheck_run_config`; `count` must be writable.
enum ComcheckStatus comcheck_run_record_count(const struct ComcheckRun *run, size_t *count);

// Copies one recorded column into `buf` of capacity `len`.
//
// # Safety
// `run` must come from `comcheck_run_config`; `buf` must hold `len` doubles.
enum ComcheckStatus comcheck_run_series(const struct ComcheckRun *run,
                                        enum ComcheckColumn column,
                                        double *buf,
                                        size_t len);

// # Safety
// `run` must come from `comcheck_run_config` and not be used afterwards; null is ignored.
void comcheck_run_free(struct ComcheckRun *run);

// Product state `|N, 0, ..., 0>` on a centered grid, paired with the
// stationary Hamiltonian of trap frequency `omega` and coupling `g`.
//
// # Safety
// `out` must be writable.
enum ComcheckStatus comcheck_state_new_product(size_t particles,
                                               size_t modes,
                                               double length,
                                               size_t points,
                                               double width,
                                               enum ComcheckShape shape,
                                               double omega,
                                               double g,
                                               struct ComcheckState **out);

// Imaginary-time relaxation in place; writes the converged energy.
//
// # Safety
// `state` must come from `comcheck_state_new_product`; `energy` may be null.
enum ComcheckStatus comcheck_state_relax(struct ComcheckState *state,
                                         double dtau,
                                         double tolerance,
                                         double *energy);

// Real-time propagation in place up to `t_final` with fixed step `dt`.
//
// # Safety
// `state` must come from `comcheck_state_new_product`.
enum ComcheckStatus comcheck_state_propagate(struct ComcheckState *state,
                                             double t_final,
                                             double dt);

// # Safety
// `state` must come from `comcheck_state_new_product`; `out` must be writable.
enum ComcheckStatus comcheck_state_observables(const struct ComcheckState *state,
                                               struct ComcheckObservables *out);

// Number of orbitals M.
//
// # Safety
// `state` must come from `comcheck_state_new_product`; `modes` must be writable.
enum ComcheckStatus comcheck_state_modes(const struct ComcheckState *state, size_t *modes);

// Natural occupation numbers, descending, into `buf` of capacity `len` (at least M).
//
// # Safety
// `state` must come from `comcheck_state_new_product`; `buf` must hold `len` doubles.
enum ComcheckStatus comcheck_state_occupations(const struct ComcheckState *state,
                                               double *buf,
                                               size_t len);

// # Safety
// `state` must come from `comcheck_state_new_product` and not be used afterwards; null is ignored.
void comcheck_state_free(struct ComcheckState *state);

// Exact ground-state energy of two trapped bosons in units of the trap quantum.
//
// # Safety
// `energy` must be writable.
enum ComcheckStatus comcheck_exact_energy(double g, double *energy);

// COM-variance test of run `a` against reference `b` (run directories or
// time-series CSV files).
//
// # Safety
// `a` and `b` must be NUL-terminated strings; `verdict` and `metric` must be writable.
enum ComcheckStatus comcheck_compare(const char *a,
                                     const char *b,
                                     double tolerance,
                                     enum ComcheckVerdict *verdict,
                                     double *metric);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COMCHECK_H */
