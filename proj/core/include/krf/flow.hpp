#pragma once

// Time integration of the reduced flow
//
//     d phi / dt = (n-1) phi'/phi + phi''/phi' - n            (+ forcing)
//
// on the total space, detection of the singular time, the surgical
// push-down to the blow-down phase, continuation there, and the two
// regularization devices: the eps-forced parabolic flows and the elliptic
// one-dimensional Monge-Ampere solves.

#include "krf/calabi.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace krf {

enum class Scheme { Explicit, LaggedCrankNicolson };
enum class BoundaryMode { Robin, Dirichlet };

struct SolverConfig {
    double dt_init = 1e-4;
    double dt_safety = 0.9;             // CFL safety factor for the explicit scheme
    Scheme scheme = Scheme::LaggedCrankNicolson;
    double stop_threshold = 1e-3;       // halt when area_D0 <= stop_threshold * a0
    std::uint64_t max_steps = 2'000'000;
    double snapshot_cadence = 0.01;
    BoundaryMode boundary = BoundaryMode::Robin; // Dirichlet retained as a diagnostic
};

struct FlowEvent {
    enum class Kind { SingularTimeReached, SurgeryPerformed, Halted };
    Kind kind;
    double t = 0.0;
    std::string reason;
};

// One record per accepted step; the rate fits and the extinction estimator
// work from this, never from the (sparser) snapshots.
struct TraceSample {
    double t = 0.0;
    double area_d0 = 0.0;
    double area_dinf = 0.0;
    double min_phi_prime = 0.0;
};

struct FlowTrajectory {
    FlowParams params;
    SolverConfig solver;
    std::vector<RadialProfile> snapshots; // strictly increasing t
    std::vector<TraceSample> trace;
    std::vector<FlowEvent> events;
};

// The regularization family.  K is the section-norm exponent of the
// regularized volume form; K <= 0 means "use the default 2n".
struct EpsFamilyConfig {
    std::vector<double> eps_list; // strictly decreasing, all > 0
    int K = 0;
    double horizon = 0.12; // post-singular integration length
};

// Throws std::invalid_argument on any violated invariant.
void validate(const EpsFamilyConfig& cfg);

// Per-step controls used by the drivers; the plain step() overload runs one
// default step of cfg.dt_init.
struct StepOptions {
    double dt = -1.0;    // < 0: use cfg.dt_init; 0 is the identity
    double theta = 0.5;  // implicit weight on phi'' (0.5 = trapezoidal, 1 = backward)
    double eps = 0.0;    // > 0 switches on the regularization forcing
};

// ---------------------------------------------------------------------------
// Right-hand side
// ---------------------------------------------------------------------------

// Forcing term of the eps-regularized flow: (n-k) eps / (eps + e^{k rho}).
// Tends to n-k at the divisor and vanishes as eps -> 0.
double eps_forcing(int n, int k, double eps, double rho);

// Full-grid right-hand side: centered differences on the interior, the
// boundary nodes closed with the smooth exponential orders
// phi''/phi' = m (m = k at the zero section, 1 at the orbifold point, -k at
// the infinity section).  eps > 0 adds the regularization forcing.
std::vector<double> reduced_rhs(const RadialProfile& prof, double eps = 0.0);

// ---------------------------------------------------------------------------
// Stepping and runs
// ---------------------------------------------------------------------------

RadialProfile step(const RadialProfile& prof, const SolverConfig& cfg,
                   const KahlerClass& cls);
RadialProfile step(const RadialProfile& prof, const SolverConfig& cfg,
                   const KahlerClass& cls, const StepOptions& opts);

// Integrate the total-space phase up to t_end, halting early when the
// zero-section area falls to stop_threshold * a0.  Snapshots at the solver
// cadence plus any extra_snapshot_times (hit exactly by clipping dt).
FlowTrajectory run_to(const RadialProfile& prof, const SolverConfig& cfg,
                      const FlowParams& params, double t_end,
                      const std::vector<double>& extra_snapshot_times = {});

// Least-squares extrapolation of the traced zero-section area to zero,
// using the samples in the final measured decade.  Requires the run to have
// reached the stop threshold.
double detect_extinction(const FlowTrajectory& traj);

// Excises the residual zero-section area from the final profile (a constant
// shift, so increments are untouched), re-tags it for the blow-down phase
// and records the event.  Refuses when the area is still above
// 2 * stop_threshold * a0 or when the trajectory has already been cut.
RadialProfile surgery(FlowTrajectory& traj);

// Continue the flow on the blow-down for the given horizon.  horizon = 0
// returns a single-snapshot trajectory equal to the input.
FlowTrajectory continue_on_orbifold(const RadialProfile& prof,
                                    const SolverConfig& cfg,
                                    const FlowParams& params, double horizon,
                                    const std::vector<double>& extra_snapshot_times = {});

// The eps-forced flow started from the total-space profile at T - eps.
// The initial time stamp is rebased to prof.t + eps so that snapshot times
// line up with the blow-down continuation on a common clock.
FlowTrajectory run_eps_flow(const RadialProfile& prof_T_minus_eps, double eps,
                            const SolverConfig& cfg, const FlowParams& params,
                            double horizon,
                            const std::vector<double>& extra_snapshot_times = {});

// ---------------------------------------------------------------------------
// Elliptic regularization (one-dimensional Monge-Ampere by quadrature)
// ---------------------------------------------------------------------------

struct RadialMASolution {
    std::vector<double> phi; // momentum profile on the grid
    double C = 1.0;          // normalization constant
};

// Solves phi^{n-1} phi' = C * density(rho) * e^{n rho} by exact cumulative
// quadrature:  phi^n(rho) = n C Int_{rho_min}^{rho} density e^{n s} ds
//                           + n C left_tail.
// C is fixed by   C * (grid integral + left_tail + right_tail) = target,
// where the tails account for the density mass beyond the grid.
RadialMASolution solve_radial_ma(int n, const std::vector<double>& grid,
                                 const std::function<double(double)>& density,
                                 double target, double left_tail,
                                 double right_tail);

// Back-substitution residual: max over a refined grid of
// |(phi^n/n)' - C density e^{n rho}| / (C density e^{n rho}), the derivative
// taken by a high-order stencil on an internally refined re-solve that is
// checked for consistency with the supplied phi.  For refine >= 6 the
// stencil is sampled strictly between consecutive nodes of `grid`, so a
// density that is only piecewise smooth across those nodes (splined data)
// is differentiated where it is analytic.
double ma_residual_max(int n, const std::vector<double>& grid,
                       const std::function<double(double)>& density, double C,
                       const std::vector<double>& phi, std::size_t refine = 8);

// The regularized static solve: density built from the total-space profile
// at T - eps via
//   dens_eps = e^{K k rho}/(eps + e^{K k rho}) * det g(T-eps) + eps * det g_ref
// with det g_ref the model blow-down density in the class at time T; the
// normalization matches the model total volume.  Returns the momentum
// profile of the solved metric, stamped at the rebased time T.
RadialProfile solve_psi_eps(const FlowParams& params, double eps, int K,
                            const RadialProfile& flow_profile_at_T_minus_eps);

// Residual check for solve_psi_eps output (same density construction).
double psi_ma_residual(const FlowParams& params, double eps, int K,
                       const RadialProfile& flow_profile_at_T_minus_eps,
                       const RadialProfile& psi);

} // namespace krf
