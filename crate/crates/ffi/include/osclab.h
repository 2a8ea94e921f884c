#ifndef OSCLAB_H
#define OSCLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum OsclabStatus {
  OSCLAB_STATUS_OK = 0,
  OSCLAB_STATUS_INVALID_INPUT = 1,
  OSCLAB_STATUS_CONSTRAINT_VIOLATION = 2,
  OSCLAB_STATUS_GRADIENT_FLOOR = 3,
  OSCLAB_STATUS_NO_ROOT = 4,
  OSCLAB_STATUS_NON_CONVERGENCE = 5,
  OSCLAB_STATUS_BAND_LIMIT = 6,
  OSCLAB_STATUS_OUT_OF_CAP = 7,
  OSCLAB_STATUS_BOUNDARY_FREQUENCY = 8,
  OSCLAB_STATUS_CELL_MISMATCH = 9,
  OSCLAB_STATUS_OUT_OF_BOX = 10,
  OSCLAB_STATUS_DEGENERATE_GRADIENT = 11,
  OSCLAB_STATUS_PARSE = 12,
  OSCLAB_STATUS_IO = 13,
  OSCLAB_STATUS_NULL_POINTER = 14,
  OSCLAB_STATUS_PANIC = 15,
} OsclabStatus;

/**
 * A problem instance `(d, b0, b1, ρ, Φ, a)`.
 */
typedef struct OsclabInstance OsclabInstance;

/**
 * The frequency tiling at one λ.
 */
typedef struct OsclabTiling OsclabTiling;

/**
 * A tabulated window.
 */
typedef struct OsclabWindow OsclabWindow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message, NUL-terminated and truncated to `len`
 * bytes. Returns the full message length excluding the terminator.
 */
size_t osclab_last_error_message(char *buf, size_t len);

/**
 * Looks up a built-in instance by name (`paper-even-d2`, `paper-odd-d3`,
 * `flat`, `tilted`, `sum`).
 */
enum OsclabStatus osclab_instance_builtin(const char *name, struct OsclabInstance **result);

void osclab_instance_free(struct OsclabInstance *inst);

/**
 * `2d`, the ambient dimension.
 */
enum OsclabStatus osclab_instance_dim(const struct OsclabInstance *inst, size_t *dim);

/**
 * `C_ρ`, `C'_ρ`, `C_Φ` and `C_a`.
 */
enum OsclabStatus osclab_instance_constants(const struct OsclabInstance *inst,
                                            double *c_rho,
                                            double *c_rho_inv,
                                            double *c_phi,
                                            double *c_amp);

/**
 * `OSCLAB_STATUS_OK` when `|λ|^(-1/2) <= min(b1 - b0, 1)`.
 */
enum OsclabStatus osclab_check_lambda(const struct OsclabInstance *inst, double lambda);

enum OsclabStatus osclab_tiling_new(double lambda, double xi_max, struct OsclabTiling **result);

void osclab_tiling_free(struct OsclabTiling *t);

enum OsclabStatus osclab_tiling_len(const struct OsclabTiling *t, size_t *len);

/**
 * Endpoints of cell `index`, in increasing order of `lo`.
 */
enum OsclabStatus osclab_tiling_cell(const struct OsclabTiling *t,
                                     size_t index,
                                     int64_t *lo,
                                     int64_t *hi);

/**
 * The cell whose interior holds `xi`; `OSCLAB_STATUS_BOUNDARY_FREQUENCY`
 * on a shared endpoint.
 */
enum OsclabStatus osclab_tiling_locate(const struct OsclabTiling *t,
                                       double xi,
                                       int64_t *lo,
                                       int64_t *hi);

enum OsclabStatus osclab_window_default(struct OsclabWindow **result);

void osclab_window_free(struct OsclabWindow *w);

/**
 * `φ(x)` and `min φ̂` on `[-1/2, 1/2]`.
 */
enum OsclabStatus osclab_window_eval(const struct OsclabWindow *w,
                                     double x,
                                     double *value,
                                     double *fourier_floor);

/**
 * The kernel `𝓘(y, ξ)` at `λ`; `y` and `xi` hold `dim` values each.
 */
enum OsclabStatus osclab_kernel_eval(const struct OsclabInstance *inst,
                                     const struct OsclabWindow *w,
                                     const struct OsclabTiling *t,
                                     const double *y,
                                     const double *xi,
                                     size_t dim,
                                     double lambda,
                                     double *re,
                                     double *im);

/**
 * `I_λ` for the default extremizer family.
 */
enum OsclabStatus osclab_extremizer_value(const struct OsclabInstance *inst,
                                          double lambda,
                                          double *re,
                                          double *im);

/**
 * Samples the nondegeneracy determinant on a tensor grid of `B1` with
 * `density` points per axis and `circle_points` directions.
 */
enum OsclabStatus osclab_certify(const struct OsclabInstance *inst,
                                 size_t density,
                                 size_t circle_points,
                                 double *c_lower,
                                 size_t *failures);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OSCLAB_H */
