#pragma once

// The symmetry ansatz: momentum profiles phi(rho) with rho = log|z|^2,
// their geometric meaning (metric eigenvalues, boundary areas, smoothness
// orders), and the linear evolution of the Kahler class.

#include "krf/local_model.hpp"

#include <utility>
#include <vector>

namespace krf {

// Flow parameters.  Invariants: n >= 2, 1 <= k <= n-1, 0 < a0 < b0,
// (n+k) a0 < (n-k) b0.
struct FlowParams {
    int n = 2;
    int k = 1;
    double a0 = 1.0;
    double b0 = 4.0;
};

// Throws std::invalid_argument on any violated invariant.
void validate(const FlowParams& p);

// Cohomology class coefficients at time t: a_t scales the zero-section
// divisor area, b_t the infinity-section area.
struct KahlerClass {
    double a_t = 0.0;
    double b_t = 0.0;
    double t = 0.0;
};

enum class Phase { ManifoldX, OrbifoldY, LocalModel };

// Momentum profile phi(rho) on a uniform grid.  phi must be strictly
// increasing (metric positivity) and positive on the interior.  n and k are
// carried so geometric quantities (determinants, closure orders) need no
// side channel.
struct RadialProfile {
    std::vector<double> rho_grid;
    std::vector<double> phi;
    Phase phase = Phase::ManifoldX;
    double t = 0.0;
    int n = 2;
    int k = 1;
};

// ---------------------------------------------------------------------------
// Grid and profile construction helpers
// ---------------------------------------------------------------------------

std::vector<double> make_uniform_grid(double rho_min, double rho_max,
                                      std::size_t points);

// Grid spacing of a uniform grid (throws on degenerate grids).
double grid_spacing(const RadialProfile& prof);

// Default initial data on the total space:
//   phi0 = a0 + (b0 - a0) e^{k rho} / (1 + e^{k rho}),
// which satisfies both boundary smoothness orders exactly and has boundary
// areas (a0, b0).
RadialProfile initial_profile(const FlowParams& p, double rho_min,
                              double rho_max, std::size_t points);

// Model profile b e^{k rho}/(1+e^{k rho}) on a grid, tagged as the
// blow-down phase, for use as a reference metric.
RadialProfile reference_profile_y(double b, int k,
                                  const std::vector<double>& grid);

// First derivative of phi on the whole grid: centered differences inside,
// one-sided second-order stencils at the ends.
std::vector<double> phi_prime(const RadialProfile& prof);

// Throws NonKahlerProfile at the first grid point where phi <= 0 or the
// forward difference of phi fails to be positive.
void assert_kahler(const RadialProfile& prof);

// ---------------------------------------------------------------------------
// Class bookkeeping
// ---------------------------------------------------------------------------

// T = a0 / (n - k): the time at which the zero-section area reaches zero.
double singular_time(const FlowParams& p);

// Class coefficients at time t:  a_t = a0 + (k-n) t (clamped to 0 after the
// singular time), b_t = b0 - (k+n) t.  Valid for 0 <= t <= b0/(n+k); the
// identity a_t = (n-k)(T - t) holds exactly on [0, T].
KahlerClass class_at(const FlowParams& p, double t);

// ---------------------------------------------------------------------------
// Profile geometry
// ---------------------------------------------------------------------------

// Metric eigenvalues at the grid node nearest to rho (interior only):
//   lambda_sph = phi e^{-rho},  lambda_rad = phi' e^{-rho},
//   det = phi^{n-1} phi' e^{-n rho}.
AmbientHessian metric_eigenvalues(const RadialProfile& prof, double rho);

// Boundary areas (a, b) read off the profile ends, with the leading
// exponential-tail term subtracted via phi'/k so the truncated domain does
// not inflate the readout.  On the blow-down phase the zero-section area is
// 0 by definition.
std::pair<double, double> boundary_class(const RadialProfile& prof);

// Deviation of the measured boundary exponential orders from the smooth
// ones: left = |phi''/phi' - m| near rho_min with m = k on the total space
// (and the local model) and m = 1 on the blow-down; right = |phi''/phi' + k|
// near rho_max.  Large values are diagnostics, not errors.
std::pair<double, double> smoothness_residual(const RadialProfile& prof);

} // namespace krf
