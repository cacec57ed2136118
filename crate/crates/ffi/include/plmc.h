#ifndef PLMC_H
#define PLMC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum PlmcStatus {
  PLMC_STATUS_OK = 0,
  PLMC_STATUS_INVALID_INPUT = 1,
  PLMC_STATUS_DOMAIN = 2,
  PLMC_STATUS_DIVERGENCE = 3,
  PLMC_STATUS_INFEASIBLE = 4,
  PLMC_STATUS_INSTABILITY = 5,
  PLMC_STATUS_PARSE = 6,
  PLMC_STATUS_IO = 7,
  PLMC_STATUS_CONVERGENCE = 8,
  PLMC_STATUS_NULL_POINTER = 9,
  PLMC_STATUS_PANIC = 10,
} PlmcStatus;

typedef struct PlmcPreconditioner PlmcPreconditioner;

/**
 * Target potential `g` with its convexity constants and minimizer.
 */
typedef struct PlmcTarget PlmcTarget;

typedef struct PlmcTrajectory PlmcTrajectory;

typedef struct PlmcChainConfig {
  double gamma;
  size_t iterations;
  uint64_t seed;
  /**
   * Noise stream; replicate `r` of a batch uses stream `r`.
   */
  uint64_t stream;
  size_t record_every;
  size_t burn_in;
} PlmcChainConfig;

typedef struct PlmcSamplingPlan {
  double horizon;
  double c_const;
  double c_star;
  double gamma_max;
  uint64_t iterations;
  double kappa;
  double kappa_star;
  bool degenerate;
} PlmcSamplingPlan;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the next failing call.
 */
const char *plmc_last_error(void);

/**
 * # Safety
 * `a` must point to `dim` doubles; `out` must be writable.
 */
enum PlmcStatus plmc_target_mixture(const double *a, size_t dim, struct PlmcTarget **out);

/**
 * # Safety
 * `out` must be writable.
 */
enum PlmcStatus plmc_target_gcos(double lambda1, size_t dim, struct PlmcTarget **out);

/**
 * Gaussian target `g(x) = ½ xᵀ A x` with precision `A` (row-major `dim × dim`).
 *
 * # Safety
 * `precision` must point to `dim * dim` doubles; `out` must be writable.
 */
enum PlmcStatus plmc_target_gaussian(const double *precision, size_t dim, struct PlmcTarget **out);

/**
 * Logistic path target read from an edge-list file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum PlmcStatus plmc_target_logistic_load(const char *path, struct PlmcTarget **out);

/**
 * # Safety
 * `target` must come from a `plmc_target_*` constructor or be NULL.
 */
void plmc_target_free(struct PlmcTarget *target);

/**
 * # Safety
 * `target` must be a live handle or NULL (returns 0).
 */
size_t plmc_target_dim(const struct PlmcTarget *target);

/**
 * Strong convexity `m`, gradient Lipschitz constant `M` and the minimizer (`dim` doubles).
 *
 * # Safety
 * Output pointers must be writable; `x_star` must hold `dim` doubles.
 */
enum PlmcStatus plmc_target_constants(const struct PlmcTarget *target,
                                      double *m,
                                      double *big_m,
                                      double *x_star,
                                      size_t dim);

/**
 * # Safety
 * `x` must hold `dim` doubles; `out` must be writable.
 */
enum PlmcStatus plmc_target_potential(const struct PlmcTarget *target,
                                      const double *x,
                                      size_t dim,
                                      double *out);

/**
 * # Safety
 * `x` and `grad` must each hold `dim` doubles.
 */
enum PlmcStatus plmc_target_gradient(const struct PlmcTarget *target,
                                     const double *x,
                                     size_t dim,
                                     double *grad);

/**
 * # Safety
 * `out` must be writable.
 */
enum PlmcStatus plmc_precond_identity(size_t dim, struct PlmcPreconditioner **out);

/**
 * AR(1) correlation matrix `H_ij = rho^|i-j|`, `|rho| < 1`.
 *
 * # Safety
 * `out` must be writable.
 */
enum PlmcStatus plmc_precond_ar1(double rho, size_t dim, struct PlmcPreconditioner **out);

/**
 * # Safety
 * `h` must point to `dim * dim` doubles (row-major); `out` must be writable.
 */
enum PlmcStatus plmc_precond_dense(const double *h, size_t dim, struct PlmcPreconditioner **out);

/**
 * # Safety
 * `precond` must come from a `plmc_precond_*` constructor or be NULL.
 */
void plmc_precond_free(struct PlmcPreconditioner *precond);

/**
 * Extreme eigenvalues `m_H`, `M_H`.
 *
 * # Safety
 * Output pointers must be writable.
 */
enum PlmcStatus plmc_precond_bounds(const struct PlmcPreconditioner *precond,
                                    double *min,
                                    double *max);

/**
 * Runs one chain from `x0`.
 *
 * # Safety
 * Handles must be live; `config` must be readable; `x0` must hold `dim` doubles.
 */
enum PlmcStatus plmc_run_chain(const struct PlmcTarget *target,
                               const struct PlmcPreconditioner *precond,
                               const struct PlmcChainConfig *config,
                               const double *x0,
                               size_t dim,
                               struct PlmcTrajectory **out);

/**
 * # Safety
 * `traj` must be a live handle or NULL (returns 0).
 */
size_t plmc_trajectory_rows(const struct PlmcTrajectory *traj);

/**
 * # Safety
 * `traj` must be a live handle or NULL (returns 0).
 */
size_t plmc_trajectory_dim(const struct PlmcTrajectory *traj);

/**
 * Copies the recorded states row-major into `out` (`rows * dim` doubles).
 *
 * # Safety
 * `out` must hold `len` doubles.
 */
enum PlmcStatus plmc_trajectory_copy_states(const struct PlmcTrajectory *traj,
                                            double *out,
                                            size_t len);

/**
 * # Safety
 * `traj` must come from [`plmc_run_chain`] or be NULL.
 */
void plmc_trajectory_free(struct PlmcTrajectory *traj);

/**
 * Open interval of step sizes with drift factor below one.
 *
 * # Safety
 * Handles must be live; output pointers writable.
 */
enum PlmcStatus plmc_gamma_interval(const struct PlmcTarget *target,
                                    const struct PlmcPreconditioner *precond,
                                    double *lo,
                                    double *hi);

/**
 * Rate bound at `(r, d)` given drift and minorization constants.
 *
 * # Safety
 * `out` must be writable.
 */
enum PlmcStatus plmc_rho_bound(double lambda_tilde,
                               double b_tilde,
                               double eta,
                               double r,
                               double d,
                               double *out);

/**
 * W2 sampling plan with `κ = m m_H`. A non-positive `alpha_exp` selects `κ/4`.
 *
 * # Safety
 * Handles must be live; `x0` must hold `dim` doubles; `out` must be writable.
 */
enum PlmcStatus plmc_plan_sampling(const struct PlmcTarget *target,
                                   const struct PlmcPreconditioner *precond,
                                   const double *x0,
                                   size_t dim,
                                   double epsilon,
                                   double alpha_exp,
                                   struct PlmcSamplingPlan *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PLMC_H */
