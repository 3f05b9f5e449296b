#ifndef RTSOLVE_H
#define RTSOLVE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. The first four match the command-line exit codes.
 */
typedef enum RtsStatus {
  RTS_STATUS_OK = 0,
  /**
   * A linear solve failed to converge or hit a breakdown.
   */
  RTS_STATUS_SOLVER_FAILURE = 1,
  RTS_STATUS_CONFIG_ERROR = 2,
  RTS_STATUS_IO_ERROR = 3,
  RTS_STATUS_INVALID_ARGUMENT = 4,
  RTS_STATUS_NULL_POINTER = 5,
  /**
   * The output buffer is shorter than the data; nothing was written.
   */
  RTS_STATUS_BUFFER_TOO_SMALL = 6,
  RTS_STATUS_PANIC = 7,
} RtsStatus;

/**
 * Opaque simulation handle.
 */
typedef struct RtsSimulation RtsSimulation;

/**
 * Summary of the most recent linear solve.
 */
typedef struct RtsSolveReport {
  size_t iterations;
  size_t matvec_count;
  /**
   * Relative preconditioned residual at exit.
   */
  double final_residual;
  /**
   * 1 when the tolerance was met.
   */
  uint8_t converged;
} RtsSolveReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a simulation from a config file at `path`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum RtsStatus rts_simulation_from_config_file(const char *path, struct RtsSimulation **out);

/**
 * Creates a simulation from config text.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum RtsStatus rts_simulation_from_config_text(const char *text, struct RtsSimulation **out);

/**
 * Creates a simulation from a named preset. A finite positive `epsilon`
 * overrides the preset value; pass NaN to keep it.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum RtsStatus rts_simulation_from_preset(const char *name,
                                          double epsilon,
                                          struct RtsSimulation **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `sim` must be null or a handle not yet freed.
 */
void rts_simulation_free(struct RtsSimulation *sim);

/**
 * Takes one step of the configured size.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum RtsStatus rts_simulation_step(struct RtsSimulation *sim);

/**
 * Steps until time `t_end`, shortening the last step to land on it.
 * The state is unchanged past the first failing step.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum RtsStatus rts_simulation_advance(struct RtsSimulation *sim, double t_end);

/**
 * Current simulation time, or NaN for a null handle.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
double rts_simulation_time(const struct RtsSimulation *sim);

/**
 * Number of completed steps, or 0 for a null handle.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
size_t rts_simulation_step_count(const struct RtsSimulation *sim);

/**
 * Number of spatial cells, or 0 for a null handle.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
size_t rts_simulation_cell_count(const struct RtsSimulation *sim);

/**
 * Number of angular nodes, or 0 for a null handle.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
size_t rts_simulation_node_count(const struct RtsSimulation *sim);

/**
 * Copies the cell densities into `out`, which must hold `cell_count` values.
 *
 * # Safety
 * `sim` must be a live handle; `out` must be valid for `len` writes.
 */
enum RtsStatus rts_simulation_density(const struct RtsSimulation *sim, double *out, size_t len);

/**
 * Copies quadrature nodes and weights, `node_count` values each. Nodes are
 * direction cosines in slab geometry and angles on the circle.
 *
 * # Safety
 * `sim` must be a live handle; both buffers must be valid for `len` writes.
 */
enum RtsStatus rts_simulation_quadrature(const struct RtsSimulation *sim,
                                         double *nodes,
                                         double *weights,
                                         size_t len);

/**
 * Writes the report of the latest linear solve. Before the first step the
 * report is all zeros.
 *
 * # Safety
 * `sim` must be a live handle; `out` must be valid for one write.
 */
enum RtsStatus rts_simulation_last_report(const struct RtsSimulation *sim,
                                          struct RtsSolveReport *out);

/**
 * Condition number of the even-parity system at the handle's ε and Δt.
 * A nonzero `preconditioned` selects the collision-shift preconditioned
 * operator instead of `A + B`. Dense eigenvalues are used up to 1024
 * unknowns and Lanczos estimates beyond.
 *
 * # Safety
 * `sim` must be a live handle; `out` must be valid for one write.
 */
enum RtsStatus rts_simulation_condition_number(const struct RtsSimulation *sim,
                                               uint8_t preconditioned,
                                               double *out);

/**
 * Copies the calling thread's last error message into `buf` as a
 * NUL-terminated string, truncating to fit. Returns the full message
 * length including the terminator, so a call with `len = 0` sizes the
 * buffer. The message is empty after a successful call.
 *
 * # Safety
 * `buf` must be null or valid for `len` writes.
 */
size_t rts_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rts_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RTSOLVE_H */
