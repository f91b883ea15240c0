#include "krf/flow.hpp"
#include "krf/errors.hpp"
#include "krf/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

namespace krf {

namespace {

// Exponential order of the smooth closure at the left boundary.
double left_closure_order(const RadialProfile& prof) {
    return prof.phase == Phase::OrbifoldY ? 1.0 : static_cast<double>(prof.k);
}

// min over the grid of the forward difference quotient (cheap positivity
// and stiffness indicator; the trace records it every step).
double min_forward_slope(const RadialProfile& prof, double h) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < prof.phi.size(); ++i)
        m = std::min(m, (prof.phi[i + 1] - prof.phi[i]) / h);
    return m;
}

// Right-hand side at the two boundary nodes: the smooth closure supplies
// phi''/phi' = m, so  dphi/dt = (n-1) phi'/phi + m - n (+ forcing), with
// phi' from a one-sided second-order stencil.
double boundary_rhs_left(const RadialProfile& prof, double h, double eps) {
    const double d = fd_first_left(prof.phi, h);
    const double nn = static_cast<double>(prof.n);
    double r = (nn - 1.0) * d / prof.phi.front() + left_closure_order(prof) - nn;
    if (eps > 0.0)
        r += eps_forcing(prof.n, prof.k, eps, prof.rho_grid.front());
    return r;
}

double boundary_rhs_right(const RadialProfile& prof, double h, double eps) {
    const double d = fd_first_right(prof.phi, h);
    const double nn = static_cast<double>(prof.n);
    double r = (nn - 1.0) * d / prof.phi.back() - static_cast<double>(prof.k) - nn;
    if (eps > 0.0)
        r += eps_forcing(prof.n, prof.k, eps, prof.rho_grid.back());
    return r;
}

// Full right-hand side vector (interior by centered differences).
std::vector<double> rhs_vector(const RadialProfile& prof, double h, double eps) {
    const std::size_t N = prof.phi.size();
    const double nn = static_cast<double>(prof.n);
    std::vector<double> r(N);
    r[0] = boundary_rhs_left(prof, h, eps);
    for (std::size_t i = 1; i + 1 < N; ++i) {
        const double phi = prof.phi[i];
        const double d = fd_first_central(prof.phi, i, h);
        const double dd = fd_second_central(prof.phi, i, h);
        if (!(phi > 0.0))
            throw NonKahlerProfile(prof.rho_grid[i], phi, "phi");
        if (!(d > 0.0))
            throw NonKahlerProfile(prof.rho_grid[i], d, "phi'");
        r[i] = (nn - 1.0) * d / phi + dd / d - nn;
        if (eps > 0.0)
            r[i] += eps_forcing(prof.n, prof.k, eps, prof.rho_grid[i]);
    }
    r[N - 1] = boundary_rhs_right(prof, h, eps);
    return r;
}

// One Heun (RK2) step of the full rhs.  dt is clamped to the diffusion
// stability bound; the clamped value is returned through dt_taken.
RadialProfile explicit_step(const RadialProfile& prof, const SolverConfig& cfg,
                            double dt, double eps, double& dt_taken) {
    const double h = grid_spacing(prof);
    const double dt_stable =
        cfg.dt_safety * h * h * min_forward_slope(prof, h) / 2.0;
    if (dt_stable < cfg.dt_init * 1e-8)
        throw CFLFailure(dt_stable);
    dt_taken = std::min(dt, dt_stable);

    const auto r1 = rhs_vector(prof, h, eps);
    RadialProfile mid = prof;
    for (std::size_t i = 0; i < mid.phi.size(); ++i)
        mid.phi[i] += dt_taken * r1[i];
    const auto r2 = rhs_vector(mid, h, eps);

    RadialProfile out = prof;
    for (std::size_t i = 0; i < out.phi.size(); ++i)
        out.phi[i] += 0.5 * dt_taken * (r1[i] + r2[i]);
    out.t = prof.t + dt_taken;
    return out;
}

// Backward-Euler update of one boundary node under the frozen-coefficient
// closure ODE  dphi/dt = A/phi - B  (A = (n-1) phi', B = n - m - forcing).
// The implicit equation is a quadratic in phi_new whose positive root
//   phi_new = ((phi - B dt) + sqrt((phi - B dt)^2 + 4 A dt)) / 2
// exists for any dt when A > 0, so the boundary value can never overshoot
// through zero even when the node collapses toward its equilibrium A/B.
double closure_backward_euler(double phi, double A, double B, double dt) {
    const double c1 = phi - B * dt;
    return 0.5 * (c1 + std::sqrt(c1 * c1 + 4.0 * A * dt));
}

// One lagged-coefficient theta step: the diffusion coefficient 1/phi' and
// the first-order source are frozen at the current level, the boundary
// nodes advance first by the closure ODE, then the interior solves a
// tridiagonal system with the new boundary values as knowns.
RadialProfile lagged_theta_step(const RadialProfile& prof, double dt,
                                double theta, double eps, double dt_nominal) {
    const std::size_t N = prof.phi.size();
    const double h = grid_spacing(prof);
    const double nn = static_cast<double>(prof.n);

    RadialProfile out = prof;

    std::vector<double> d(N);
    d[0] = fd_first_left(prof.phi, h);
    d[N - 1] = fd_first_right(prof.phi, h);
    for (std::size_t i = 1; i + 1 < N; ++i) {
        d[i] = fd_first_central(prof.phi, i, h);
        if (!(prof.phi[i] > 0.0))
            throw NonKahlerProfile(prof.rho_grid[i], prof.phi[i], "phi");
        if (!(d[i] > 0.0))
            throw NonKahlerProfile(prof.rho_grid[i], d[i], "phi'");
    }

    // Two stiffness regimes take the exponential tails out of the
    // tridiagonal solve:
    //
    //  * diffusion-stiff: the diffusion number r = dt / (phi' h^2) exceeds
    //    r_cap, i.e. the grid cannot resolve the tail -- the implicit solve
    //    would flatten it toward a harmonic profile and fight the boundary
    //    closure, ringing the first increments negative.  Here phi''/phi'
    //    equals the tail order to within the scheme error, so the band
    //    advances by the same per-node closure ODE as the boundary nodes.
    //
    //  * reaction-stiff (blow-down tail only): where phi -> 0 at the left
    //    edge, phi and phi' vanish together and the relaxation time of the
    //    (n-1) phi'/phi source, tau = phi^2 / ((n-1) phi'), drops below the
    //    step.  Every update that freezes a measured slope is then violently
    //    unstable: the node relaxes within one step onto its frozen
    //    coefficient, so grid-scale noise in a difference quotient comes
    //    back amplified by ~dt/(tau h) per step.  The stable integrator in
    //    that limit is the limit itself: the tail is slaved quasi-statically
    //    to the first resolved node, phi_i = phi_lo e^{m (rho_i - rho_lo)},
    //    which this step enforces exactly (the slaved left neighbour of the
    //    first resolved row folds into its diagonal, and the band is
    //    reconstructed from the solved phi_lo afterwards).
    //
    // The band is sized by the run's nominal step, never the (occasionally
    // truncated) actual step: a short step before a scheduled output must
    // not yank previously band-evolved nodes back into the stiff solve,
    // which would redistribute their accumulated micro-seam all at once.
    const double r_cap = 2e6;
    const double dt_ref = std::max(dt, dt_nominal);
    const double d_cap = dt_ref / (r_cap * h * h);
    const double tau_floor = 4.0 * dt_ref; // reaction-stiff below this
    // The reaction criterion only applies where the profile itself vanishes
    // (the blow-down phase left tail); elsewhere phi stays pinned above the
    // positive boundary area and the frozen source is harmless.
    const bool left_vanishes = prof.phase == Phase::OrbifoldY;
    auto stiff_left = [&](std::size_t i) {
        if (d[i] < d_cap) return true;
        return left_vanishes &&
               prof.phi[i] * prof.phi[i] < (nn - 1.0) * d[i] * tau_floor;
    };
    std::size_t lo = 1, hi = N - 2;
    while (lo <= hi && stiff_left(lo)) ++lo;
    while (hi > lo && d[hi] < d_cap) --hi;
    if (hi - lo + 1 < 32)
        throw MeshResolutionFailure(
            "implicit step: stiff tails leave fewer than 32 resolved interior nodes");
    const bool slave_left = left_vanishes && lo > 1;

    auto closure_node = [&](std::size_t i, double m) {
        const double A = (nn - 1.0) * d[i];
        double B = nn - m;
        if (eps > 0.0) B -= eps_forcing(prof.n, prof.k, eps, prof.rho_grid[i]);
        out.phi[i] = closure_backward_euler(prof.phi[i], A, B, dt);
    };
    const double m_left = left_closure_order(prof);
    const double m_right = -static_cast<double>(prof.k);
    if (!slave_left)
        for (std::size_t i = 0; i < lo; ++i) closure_node(i, m_left);
    for (std::size_t i = hi + 1; i < N; ++i) closure_node(i, m_right);

    const std::size_t M = hi - lo + 1;
    std::vector<double> lower(M), diag(M), upper(M), rhs(M);
    for (std::size_t i = lo; i <= hi; ++i) {
        const double phi = prof.phi[i];
        const double r = dt / (d[i] * h * h); // dt * D_i / h^2 with D_i = 1/phi'
        double source = (nn - 1.0) * d[i] / phi - nn;
        if (eps > 0.0)
            source += eps_forcing(prof.n, prof.k, eps, prof.rho_grid[i]);
        const double lap = prof.phi[i + 1] - 2.0 * phi + prof.phi[i - 1];

        const std::size_t j = i - lo;
        lower[j] = -theta * r;
        diag[j] = 1.0 + 2.0 * theta * r;
        upper[j] = -theta * r;
        rhs[j] = phi + dt * source + (1.0 - theta) * r * lap;
    }
    // Fold the band neighbours into the implicit system so the interface
    // sees the new-time boundary values.  A slaved tail has no value of its
    // own yet: its first node is e^{-m h} times the first resolved unknown,
    // so the coupling moves into the diagonal (which stays strictly
    // dominant, since e^{-m h} < 1) instead of the right-hand side.
    if (slave_left)
        diag[0] -= theta * (dt / (d[lo] * h * h)) * std::exp(-m_left * h);
    else
        rhs[0] += theta * (dt / (d[lo] * h * h)) * out.phi[lo - 1];
    rhs[M - 1] += theta * (dt / (d[hi] * h * h)) * out.phi[hi + 1];

    const auto mid = solve_tridiagonal(lower, diag, upper, rhs);
    for (std::size_t i = lo; i <= hi; ++i)
        out.phi[i] = mid[i - lo];
    if (slave_left)
        for (std::size_t i = 0; i < lo; ++i)
            out.phi[i] = out.phi[lo] *
                         std::exp(m_left * (prof.rho_grid[i] - prof.rho_grid[lo]));
    out.t = prof.t + dt;
    return out;
}

RadialProfile step_core(const RadialProfile& prof, const SolverConfig& cfg,
                        const KahlerClass& cls, const StepOptions& opts) {
    assert_kahler(prof);
    double dt = opts.dt < 0.0 ? cfg.dt_init : opts.dt;
    if (dt == 0.0) return prof;

    RadialProfile out;
    if (cfg.scheme == Scheme::Explicit) {
        double taken = dt;
        out = explicit_step(prof, cfg, dt, opts.eps, taken);
    } else {
        out = lagged_theta_step(prof, dt, opts.theta, opts.eps, cfg.dt_init);
    }

    if (cfg.boundary == BoundaryMode::Dirichlet) {
        // Diagnostic mode: pin the boundary values to the class law instead
        // of letting the closures produce the rates.
        const double dtau = out.t - cls.t;
        const double kk = static_cast<double>(prof.k), nn = static_cast<double>(prof.n);
        if (prof.phase != Phase::OrbifoldY)
            out.phi.front() = cls.a_t + (kk - nn) * dtau;
        out.phi.back() = cls.b_t - (kk + nn) * dtau;
    }

    assert_kahler(out);
    return out;
}

// Shared time-integration driver.
struct DriveSpec {
    double t_end = 0.0;
    bool halt_on_area = false;
    double eps = 0.0;
    std::uint64_t startup_steps = 0; // first steps at dt/100, fully implicit
    double theta_main = 0.5;
    std::vector<double> extra_times;
};

std::vector<double> build_schedule(double t0, const DriveSpec& spec,
                                   double cadence) {
    std::vector<double> s;
    if (cadence > 0.0) {
        for (std::uint64_t j = 1;; ++j) {
            const double t = t0 + cadence * static_cast<double>(j);
            if (t > spec.t_end + 1e-12) break;
            s.push_back(t);
        }
    }
    for (double t : spec.extra_times)
        if (t > t0 + 1e-12 && t <= spec.t_end + 1e-12) s.push_back(t);
    s.push_back(spec.t_end);
    std::sort(s.begin(), s.end());
    std::vector<double> dedup;
    for (double t : s)
        if (dedup.empty() || t - dedup.back() > 1e-12) dedup.push_back(t);
    return dedup;
}

FlowTrajectory integrate(RadialProfile prof, const SolverConfig& cfg,
                         const FlowParams& params, const DriveSpec& spec) {
    FlowTrajectory traj;
    traj.params = params;
    traj.solver = cfg;

    const double h = grid_spacing(prof);
    const double t0 = prof.t;
    traj.snapshots.push_back(prof);
    {
        const auto [a, b] = boundary_class(prof);
        traj.trace.push_back({prof.t, a, b, min_forward_slope(prof, h)});
    }
    if (spec.t_end <= t0 + 1e-13) return traj;

    const auto schedule = build_schedule(t0, spec, cfg.snapshot_cadence);
    std::size_t next = 0;
    std::uint64_t steps = 0;
    bool halted = false;

    while (prof.t < spec.t_end - 1e-13 && !halted) {
        if (steps >= cfg.max_steps)
            throw SingularTimeNotReached(
                "max_steps exhausted at t = " + std::to_string(prof.t));

        double dt_nom = cfg.dt_init;
        double theta = spec.theta_main;
        if (steps < spec.startup_steps) {
            dt_nom /= 100.0;
            theta = 1.0;
        }
        while (next < schedule.size() && schedule[next] <= prof.t + 1e-13) ++next;
        const double target = next < schedule.size() ? schedule[next] : spec.t_end;
        const double dt = std::min(dt_nom, target - prof.t);

        const KahlerClass cls{boundary_class(prof).first, boundary_class(prof).second,
                              prof.t};
        prof = step_core(prof, cfg, cls, {dt, theta, spec.eps});
        ++steps;

        if (std::abs(prof.t - target) <= 1e-12 * std::max(1.0, std::abs(target))) {
            prof.t = target; // snap to the scheduled time exactly
            traj.snapshots.push_back(prof);
            ++next;
        }

        const auto [a, b] = boundary_class(prof);
        traj.trace.push_back({prof.t, a, b, min_forward_slope(prof, h)});

        if (spec.halt_on_area && prof.phase != Phase::OrbifoldY &&
            a <= cfg.stop_threshold * params.a0) {
            halted = true;
            if (traj.snapshots.back().t < prof.t - 1e-13)
                traj.snapshots.push_back(prof);
            traj.events.push_back(
                {FlowEvent::Kind::Halted, prof.t, "area threshold reached"});
        }
    }
    if (!halted) {
        if (traj.snapshots.back().t < prof.t - 1e-13)
            traj.snapshots.push_back(prof);
        traj.events.push_back({FlowEvent::Kind::Halted, prof.t, "t_end reached"});
    }
    return traj;
}

} // namespace

// ---------------------------------------------------------------------------
// Public operations
// ---------------------------------------------------------------------------

void validate(const EpsFamilyConfig& cfg) {
    if (cfg.eps_list.empty())
        throw std::invalid_argument("eps family: empty eps_list");
    for (std::size_t i = 0; i < cfg.eps_list.size(); ++i) {
        if (!(cfg.eps_list[i] > 0.0))
            throw std::invalid_argument("eps family: eps values must be > 0");
        if (i > 0 && !(cfg.eps_list[i] < cfg.eps_list[i - 1]))
            throw std::invalid_argument("eps family: eps_list must be strictly decreasing");
    }
    if (!(cfg.horizon >= 0.0))
        throw std::invalid_argument("eps family: horizon must be >= 0");
}

double eps_forcing(int n, int k, double eps, double rho) {
    if (eps <= 0.0) return 0.0;
    // (n-k) eps / (eps + e^{k rho}), evaluated without overflow.
    const double x = static_cast<double>(k) * rho - std::log(eps);
    if (x > 700.0) return 0.0;
    return static_cast<double>(n - k) / (1.0 + std::exp(x));
}

std::vector<double> reduced_rhs(const RadialProfile& prof, double eps) {
    assert_kahler(prof);
    return rhs_vector(prof, grid_spacing(prof), eps);
}

RadialProfile step(const RadialProfile& prof, const SolverConfig& cfg,
                   const KahlerClass& cls) {
    return step_core(prof, cfg, cls, {});
}

RadialProfile step(const RadialProfile& prof, const SolverConfig& cfg,
                   const KahlerClass& cls, const StepOptions& opts) {
    return step_core(prof, cfg, cls, opts);
}

FlowTrajectory run_to(const RadialProfile& prof, const SolverConfig& cfg,
                      const FlowParams& params, double t_end,
                      const std::vector<double>& extra_snapshot_times) {
    validate(params);
    DriveSpec spec;
    spec.t_end = t_end;
    spec.halt_on_area = prof.phase != Phase::OrbifoldY;
    // Fully implicit weighting for the driver: the left boundary layer has
    // diffusion coefficient 1/phi' ~ e^{-k rho_min}, and at that stiffness
    // the trapezoidal weight rings (its amplification tends to -1) while the
    // backward weight damps monotonically.  Per-step accuracy comparisons
    // use step() directly, which keeps the trapezoidal default.
    spec.theta_main = 1.0;
    spec.extra_times = extra_snapshot_times;
    return integrate(prof, cfg, params, spec);
}

double detect_extinction(const FlowTrajectory& traj) {
    if (traj.trace.size() < 2)
        throw SingularTimeNotReached("detect_extinction: empty trajectory");
    const double a0 = traj.params.a0;
    const double halt_area = traj.solver.stop_threshold * a0;

    double min_area = std::numeric_limits<double>::infinity();
    for (const auto& s : traj.trace) min_area = std::min(min_area, s.area_d0);
    if (min_area > 2.0 * halt_area)
        throw SingularTimeNotReached(
            "detect_extinction: run never reached the stop threshold");

    // Fit the final measured decade of the area trace and extrapolate.
    std::vector<double> ts, as;
    for (const auto& s : traj.trace) {
        if (s.area_d0 <= 0.1 * a0) {
            ts.push_back(s.t);
            as.push_back(s.area_d0);
        }
    }
    if (ts.size() < 8)
        throw InsufficientData("detect_extinction: too few samples below 0.1 a0");
    const auto fit = fit_line(ts, as);
    if (!(fit.slope < 0.0))
        throw SingularTimeNotReached("detect_extinction: area not decreasing");
    return -fit.intercept / fit.slope;
}

RadialProfile surgery(FlowTrajectory& traj) {
    for (const auto& e : traj.events)
        if (e.kind == FlowEvent::Kind::SurgeryPerformed)
            throw SurgeryRefused("surgery: trajectory already cut once");
    if (traj.snapshots.empty())
        throw SingularTimeNotReached("surgery: empty trajectory");

    const RadialProfile& last = traj.snapshots.back();
    if (last.phase == Phase::OrbifoldY)
        throw SurgeryRefused("surgery: trajectory is already on the blow-down");
    const double area = boundary_class(last).first;
    const double limit = 2.0 * traj.solver.stop_threshold * traj.params.a0;
    if (area > limit)
        throw SurgeryRefused("surgery: zero-section area " + std::to_string(area) +
                             " still above " + std::to_string(limit));

    RadialProfile pushed = last;
    // Excise the collapsed divisor rather than just re-tagging: close to the
    // cut the profile splits into the residual zero-section area plus the
    // blow-down limit, so subtracting that measured constant lands the left
    // end exactly on the exponential tail the orbifold closure expects.
    // Without the excision the residual plateau drains dynamically and the
    // drain front can outrun the boundary update.  A constant shift leaves
    // every increment -- and hence positivity of the metric -- untouched; the
    // clamp only guards the regime where the tail readout sits at rounding
    // noise, keeping the first node strictly positive.
    const double a_cut =
        std::min(area, pushed.phi.front() -
                           0.25 * (pushed.phi[1] - pushed.phi[0]));
    if (a_cut > 0.0)
        for (double& v : pushed.phi) v -= a_cut;
    pushed.phase = Phase::OrbifoldY;
    traj.events.push_back({FlowEvent::Kind::SurgeryPerformed, pushed.t, ""});
    return pushed;
}

FlowTrajectory continue_on_orbifold(const RadialProfile& prof,
                                    const SolverConfig& cfg,
                                    const FlowParams& params, double horizon,
                                    const std::vector<double>& extra_snapshot_times) {
    validate(params);
    if (prof.phase != Phase::OrbifoldY)
        throw std::invalid_argument("continue_on_orbifold: profile not on the blow-down");
    DriveSpec spec;
    spec.t_end = prof.t + horizon;
    spec.startup_steps = 10;
    // Fully implicit weighting: the boundary-condition switch makes the
    // near-origin layer stiff, and the trapezoidal weight rings there.
    spec.theta_main = 1.0;
    spec.extra_times = extra_snapshot_times;
    return integrate(prof, cfg, params, spec);
}

FlowTrajectory run_eps_flow(const RadialProfile& prof_T_minus_eps, double eps,
                            const SolverConfig& cfg, const FlowParams& params,
                            double horizon,
                            const std::vector<double>& extra_snapshot_times) {
    validate(params);
    if (!(eps > 0.0))
        throw std::invalid_argument("run_eps_flow: eps must be > 0");
    RadialProfile start = prof_T_minus_eps;
    start.t += eps; // rebase: the data at T - eps carries clock T
    DriveSpec spec;
    spec.t_end = start.t + horizon;
    spec.eps = eps;
    spec.startup_steps = 10;
    spec.theta_main = 1.0; // matches the blow-down continuation scheme
    spec.extra_times = extra_snapshot_times;
    return integrate(std::move(start), cfg, params, spec);
}

// ---------------------------------------------------------------------------
// Elliptic regularization
// ---------------------------------------------------------------------------

namespace {

// Cumulative integral of density(s) e^{n s} over each grid cell by 5-point
// Gauss-Legendre; out[i] = integral from grid[0] to grid[i].
std::vector<double> cumulative_mass(int n, const std::vector<double>& grid,
                                    const std::function<double(double)>& density) {
    std::vector<double> cum(grid.size(), 0.0);
    const double nn = static_cast<double>(n);
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const double cell = gauss_legendre_panels(
            [&](double s) {
                const double f = density(s);
                if (!std::isfinite(f) || f < 0.0)
                    throw QuadratureFailure(
                        "radial Monge-Ampere: density non-finite or negative at rho = " +
                        std::to_string(s));
                return f * std::exp(nn * s);
            },
            grid[i], grid[i + 1], 1);
        cum[i + 1] = cum[i] + cell;
    }
    return cum;
}

} // namespace

RadialMASolution solve_radial_ma(int n, const std::vector<double>& grid,
                                 const std::function<double(double)>& density,
                                 double target, double left_tail,
                                 double right_tail) {
    if (n < 1 || grid.size() < 2)
        throw std::invalid_argument("solve_radial_ma: bad dimension or grid");
    if (left_tail < 0.0 || right_tail < 0.0)
        throw QuadratureFailure("solve_radial_ma: negative tail mass");

    const auto cum = cumulative_mass(n, grid, density);
    const double full = cum.back() + left_tail + right_tail;
    if (!(full > 0.0) || !std::isfinite(full))
        throw QuadratureFailure("solve_radial_ma: density mass not positive and finite");

    RadialMASolution sol;
    sol.C = target / full;
    sol.phi.resize(grid.size());
    const double nn = static_cast<double>(n);
    for (std::size_t i = 0; i < grid.size(); ++i)
        sol.phi[i] = std::pow(nn * sol.C * (left_tail + cum[i]), 1.0 / nn);
    return sol;
}

double ma_residual_max(int n, const std::vector<double>& grid,
                       const std::function<double(double)>& density, double C,
                       const std::vector<double>& phi, std::size_t refine) {
    if (refine < 1 || grid.size() < 9 || phi.size() != grid.size())
        throw std::invalid_argument("ma_residual_max: bad arguments");
    const double nn = static_cast<double>(n);

    // Re-solve on a refined grid and insist it reproduces the supplied
    // profile at the shared nodes, so the residual certifies that object.
    // The cumulative mass is carried in extended precision: near the ends
    // the local right-hand side sits many orders of magnitude below the
    // total mass, and double-precision accumulation noise divided by that
    // small scale would swamp the certificate.
    const std::size_t M = (grid.size() - 1) * refine + 1;
    const auto fine = make_uniform_grid(grid.front(), grid.back(), M);
    std::vector<long double> u(M);
    u[0] = std::pow(static_cast<long double>(phi.front()),
                    static_cast<long double>(n)) /
           static_cast<long double>(n);
    for (std::size_t i = 0; i + 1 < M; ++i) {
        const double cell = gauss_legendre_panels(
            [&](double s) {
                const double f = density(s);
                if (!std::isfinite(f) || f < 0.0)
                    throw QuadratureFailure(
                        "radial Monge-Ampere: density non-finite or negative at rho = " +
                        std::to_string(s));
                return f * std::exp(nn * s);
            },
            fine[i], fine[i + 1], 1);
        u[i + 1] = u[i] + static_cast<long double>(C) * cell;
    }

    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double uj = std::pow(phi[j], nn) / nn;
        const double ref = static_cast<double>(u[j * refine]);
        if (std::abs(uj - ref) > 1e-10 * std::max(1.0, std::abs(ref)))
            throw QuadratureFailure(
                "ma_residual_max: profile inconsistent with the density");
    }

    const long double h = (static_cast<long double>(fine.back()) - fine.front()) /
                          static_cast<long double>(M - 1);
    double worst = 0.0;
    for (std::size_t i = 3; i + 3 < M; ++i) {
        if (refine >= 6) {
            // Keep the whole stencil inside one cell of the coarse grid so a
            // splined density is differentiated away from its knots.
            const std::size_t r = i % refine;
            if (r < 3 || r + 3 > refine) continue;
        }
        const long double lhs = (-u[i - 3] + 9.0L * u[i - 2] - 45.0L * u[i - 1] +
                                 45.0L * u[i + 1] - 9.0L * u[i + 2] + u[i + 3]) /
                                (60.0L * h);
        const double rhs = C * density(fine[i]) * std::exp(nn * fine[i]);
        if (rhs > 0.0)
            worst = std::max(worst,
                             static_cast<double>(std::fabs(
                                 (lhs - static_cast<long double>(rhs)) / rhs)));
    }
    return worst;
}

namespace {

struct PsiDensity {
    std::function<double(double)> density;
    double target = 0.0;
    double left_tail = 0.0;
    double right_tail = 0.0;
    double t_rebased = 0.0;
};

PsiDensity build_psi_density(const FlowParams& params, double eps, int K,
                             const RadialProfile& prof) {
    validate(params);
    if (!(eps > 0.0))
        throw std::invalid_argument("solve_psi_eps: eps must be > 0");
    if (K <= 0) K = 2 * params.n; // documented default exponent
    assert_kahler(prof);

    PsiDensity out;
    out.t_rebased = prof.t + eps;
    const int n = params.n, k = params.k;
    const double nn = static_cast<double>(n);
    const double b_T = class_at(params, out.t_rebased).b_t;
    const double b_flow = params.b0 - static_cast<double>(n + k) * prof.t;
    const double log_eps = std::log(eps);
    const double Kk = static_cast<double>(K) * static_cast<double>(k);

    // The flow determinant enters through a spline of its nodal values, not
    // through the derivative of a phi-spline: a cubic spline is C^2 while
    // its derivative is only C^1, and the kinks of the latter would cap the
    // high-order back-substitution residual at second order in h.
    std::vector<double> det_nodes(prof.rho_grid.size());
    {
        const std::vector<double> dphi = phi_prime(prof);
        for (std::size_t i = 0; i < prof.rho_grid.size(); ++i)
            det_nodes[i] = std::pow(prof.phi[i], nn - 1.0) * dphi[i] *
                           std::exp(-nn * prof.rho_grid[i]);
    }
    auto det_spline =
        std::make_shared<CubicSpline>(prof.rho_grid, std::move(det_nodes));
    const double lo = prof.rho_grid.front(), hi = prof.rho_grid.back();

    auto phi_ref = [b_T, k](double rho) { return fubini_type_profile(b_T, k, rho); };
    auto det_ref = [phi_ref, b_T, k, nn](double rho) {
        const double p = phi_ref(rho);
        const double dp = static_cast<double>(k) * p * (1.0 - p / b_T);
        return std::pow(p, nn - 1.0) * dp * std::exp(-nn * rho);
    };

    out.density = [det_spline, lo, hi, log_eps, Kk, eps, det_ref](double rho) {
        const double rc = std::min(std::max(rho, lo), hi);
        const double det_flow = (*det_spline)(rc);
        // Section-norm switch 1/(1 + eps e^{-K k rho}) without overflow.
        const double x = log_eps - Kk * rho;
        const double s_K = x > 700.0 ? 0.0 : 1.0 / (1.0 + std::exp(x));
        return s_K * det_flow + eps * det_ref(rho);
    };

    // Mass beyond the grid: the reference term integrates in closed form
    // (its e^{n rho}-weighted primitive is phi_ref^n / n); the flow term's
    // left tail is suppressed by the section-norm switch and its right tail
    // follows the boundary class.
    out.left_tail = eps * std::pow(phi_ref(lo), nn) / nn;
    out.right_tail = eps * (std::pow(b_T, nn) - std::pow(phi_ref(hi), nn)) / nn +
                     (std::pow(b_flow, nn) - std::pow(prof.phi.back(), nn)) / nn;
    if (out.right_tail < 0.0) out.right_tail = 0.0;
    out.target = std::pow(b_T, nn) / nn;
    return out;
}

} // namespace

RadialProfile solve_psi_eps(const FlowParams& params, double eps, int K,
                            const RadialProfile& flow_profile_at_T_minus_eps) {
    const auto dens = build_psi_density(params, eps, K, flow_profile_at_T_minus_eps);
    const auto sol = solve_radial_ma(params.n, flow_profile_at_T_minus_eps.rho_grid,
                                     dens.density, dens.target, dens.left_tail,
                                     dens.right_tail);
    RadialProfile psi;
    psi.rho_grid = flow_profile_at_T_minus_eps.rho_grid;
    psi.phi = sol.phi;
    psi.phase = Phase::OrbifoldY;
    psi.t = dens.t_rebased;
    psi.n = params.n;
    psi.k = params.k;
    return psi;
}

double psi_ma_residual(const FlowParams& params, double eps, int K,
                       const RadialProfile& flow_profile_at_T_minus_eps,
                       const RadialProfile& psi) {
    const auto dens = build_psi_density(params, eps, K, flow_profile_at_T_minus_eps);
    const auto cumC = solve_radial_ma(params.n, flow_profile_at_T_minus_eps.rho_grid,
                                      dens.density, dens.target, dens.left_tail,
                                      dens.right_tail);
    return ma_residual_max(params.n, psi.rho_grid, dens.density, cumC.C, psi.phi);
}

} // namespace krf
