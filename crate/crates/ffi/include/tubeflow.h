#ifndef TUBEFLOW_H
#define TUBEFLOW_H

/* Generated from the tubeflow-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a C API call.
 */
typedef enum TfStatus {
  /**
   * Success.
   */
  TfStatusOk = 0,
  /**
   * Invalid configuration or arguments (bad parameters, parse errors).
   */
  TfStatusConfigError = 2,
  /**
   * Numerical failure (degenerate metric, step failure, domain exit).
   */
  TfStatusNumericError = 3,
  /**
   * A required pointer argument was null.
   */
  TfStatusNullArgument = 4,
  /**
   * Internal panic; the handle state is still valid but the call did
   * nothing.
   */
  TfStatusPanic = 5,
} TfStatus;

/**
 * A three-manifold chart with its metric (opaque).
 */
typedef struct TfChart TfChart;

/**
 * An induced tube metric on the (s, psi) cylinder (opaque).
 */
typedef struct TfMetric TfMetric;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Most recent error message on this thread, or an empty string. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *tf_last_error(void);

/**
 * Euclidean 3-space in Cartesian coordinates.
 */
enum TfStatus tf_chart_euclidean3(struct TfChart **out);

/**
 * Unit 3-sphere in Hopf coordinates (eta, theta, phi).
 */
enum TfStatus tf_chart_sphere3_hopf(struct TfChart **out);

/**
 * Hyperbolic 3-space in upper half-space coordinates (x, y, z > 0).
 */
enum TfStatus tf_chart_hyperbolic3_halfspace(struct TfChart **out);

/**
 * Degenerate 3-ellipsoid with axis pairs (a, a, b, b) in Hopf-style
 * coordinates.
 */
enum TfStatus tf_chart_ellipsoid3(double a, double b, struct TfChart **out);

/**
 * Chart from metric component expressions in three named coordinates.
 * `g12`, `g13`, `g23` may be null (zero); the diagonal is required.
 * Christoffel symbols are finite-differenced.
 *
 * # Safety
 * String arguments must be null-terminated and outlive the call.
 */
enum TfStatus tf_chart_user(const char *c1,
                            const char *c2,
                            const char *c3,
                            const char *g11,
                            const char *g12,
                            const char *g13,
                            const char *g22,
                            const char *g23,
                            const char *g33,
                            struct TfChart **out);

/**
 * Release a chart handle. Null is a no-op.
 */
void tf_chart_free(struct TfChart *chart);

/**
 * Metric tensor at a chart point, written to `g_out` in row-major order
 * (9 doubles).
 *
 * # Safety
 * `x` must point to 3 readable doubles and `g_out` to 9 writable doubles.
 */
enum TfStatus tf_chart_metric(const struct TfChart *chart, const double *x, double *g_out);

/**
 * Christoffel symbols at a chart point, written to `gamma_out` as 27
 * doubles indexed `gamma_out[9 i + 3 j + k]` for Gamma^i_jk.
 *
 * # Safety
 * `x` must point to 3 readable doubles and `gamma_out` to 27 writable
 * doubles.
 */
enum TfStatus tf_chart_christoffel(const struct TfChart *chart, const double *x, double *gamma_out);

/**
 * Sectional curvature of the plane spanned by `u`, `v` at `x`.
 *
 * # Safety
 * `x`, `u`, `v` must each point to 3 readable doubles; `k_out` must be
 * writable.
 */
enum TfStatus tf_chart_sectional_curvature(const struct TfChart *chart,
                                           const double *x,
                                           const double *u,
                                           const double *v,
                                           double *k_out);

/**
 * Induced metric of the circular tube of radius `rho0` about the ellipse
 * with semi-axes (`a_semi`, `b_semi`) in Euclidean 3-space.
 */
enum TfStatus tf_metric_ellipse_tube(double a_semi,
                                     double b_semi,
                                     double rho0,
                                     struct TfMetric **out);

/**
 * Induced metric of the circular tube of radius `rho0` about a curve with
 * constant curvature scalars `k1`, `k2` in the space form of curvature
 * `k0` (-1, 0, or 1), with the given period in arc length.
 */
enum TfStatus tf_metric_circular_tube(int32_t k0,
                                      double k1,
                                      double k2,
                                      double rho0,
                                      double s_period,
                                      struct TfMetric **out);

/**
 * Load a sampled metric from a CSV grid previously written by the
 * library (columns s, psi, E, F, G with '#' headers).
 *
 * # Safety
 * `path` must be a null-terminated string.
 */
enum TfStatus tf_metric_from_csv(const char *path, struct TfMetric **out);

/**
 * Release a metric handle. Null is a no-op.
 */
void tf_metric_free(struct TfMetric *metric);

/**
 * Arc-length period of the metric's s coordinate.
 */
double tf_metric_s_period(const struct TfMetric *metric);

/**
 * First fundamental form coefficients at (s, psi), written as
 * `efg_out = [E, F, G]`.
 *
 * # Safety
 * `efg_out` must point to 3 writable doubles.
 */
enum TfStatus tf_metric_coeffs(const struct TfMetric *metric,
                               double s,
                               double psi,
                               double *efg_out);

/**
 * Integrate the unit-speed geodesic from (s0, psi0) at the given launch
 * angle for the given arc length. On success writes the final phase-space
 * state `state_out = [tau, s, psi, p_s, p_psi]` and the largest observed
 * drifts of the Hamiltonian and of p_s.
 *
 * # Safety
 * `state_out` must point to 5 writable doubles; drift pointers to one
 * writable double each (either may be null to skip).
 */
enum TfStatus tf_geodesic_integrate(const struct TfMetric *metric,
                                    double s0,
                                    double psi0,
                                    double angle,
                                    double length,
                                    double tol,
                                    double *state_out,
                                    double *h_drift_out,
                                    double *ps_drift_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TUBEFLOW_H */
