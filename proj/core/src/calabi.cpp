#include "krf/calabi.hpp"
#include "krf/errors.hpp"
#include "krf/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace krf {

void validate(const FlowParams& p) {
    if (p.n < 2)
        throw std::invalid_argument("FlowParams: n must be >= 2");
    if (p.k < 1 || p.k > p.n - 1)
        throw std::invalid_argument("FlowParams: need 1 <= k <= n-1");
    if (!(p.a0 > 0.0) || !(p.a0 < p.b0))
        throw std::invalid_argument("FlowParams: need 0 < a0 < b0");
    if (!((p.n + p.k) * p.a0 < (p.n - p.k) * p.b0))
        throw std::invalid_argument("FlowParams: class condition (n+k) a0 < (n-k) b0 violated");
}

std::vector<double> make_uniform_grid(double rho_min, double rho_max,
                                      std::size_t points) {
    if (!(rho_min < rho_max) || points < 3)
        throw std::invalid_argument("make_uniform_grid: bad bounds or point count");
    std::vector<double> g(points);
    const double h = (rho_max - rho_min) / static_cast<double>(points - 1);
    for (std::size_t i = 0; i < points; ++i)
        g[i] = rho_min + h * static_cast<double>(i);
    g.back() = rho_max;
    return g;
}

double grid_spacing(const RadialProfile& prof) {
    if (prof.rho_grid.size() < 2)
        throw std::invalid_argument("grid_spacing: need at least two nodes");
    return (prof.rho_grid.back() - prof.rho_grid.front()) /
           static_cast<double>(prof.rho_grid.size() - 1);
}

RadialProfile initial_profile(const FlowParams& p, double rho_min,
                              double rho_max, std::size_t points) {
    validate(p);
    RadialProfile prof;
    prof.rho_grid = make_uniform_grid(rho_min, rho_max, points);
    prof.phi.resize(points);
    for (std::size_t i = 0; i < points; ++i)
        prof.phi[i] = p.a0 + fubini_type_profile(p.b0 - p.a0, p.k, prof.rho_grid[i]);
    prof.phase = Phase::ManifoldX;
    prof.t = 0.0;
    prof.n = p.n;
    prof.k = p.k;
    return prof;
}

RadialProfile reference_profile_y(double b, int k,
                                  const std::vector<double>& grid) {
    RadialProfile prof;
    prof.rho_grid = grid;
    prof.phi.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        prof.phi[i] = fubini_type_profile(b, k, grid[i]);
    prof.phase = Phase::OrbifoldY;
    prof.t = 0.0;
    prof.n = k + 1; // smallest consistent ambient dimension; callers may override
    prof.k = k;
    return prof;
}

std::vector<double> phi_prime(const RadialProfile& prof) {
    const std::size_t n = prof.phi.size();
    const double h = grid_spacing(prof);
    std::vector<double> d(n);
    d[0] = fd_first_left(prof.phi, h);
    for (std::size_t i = 1; i + 1 < n; ++i)
        d[i] = fd_first_central(prof.phi, i, h);
    d[n - 1] = fd_first_right(prof.phi, h);
    return d;
}

void assert_kahler(const RadialProfile& prof) {
    const std::size_t n = prof.phi.size();
    if (n < 3 || prof.rho_grid.size() != n)
        throw std::invalid_argument("RadialProfile: malformed grid");
    for (std::size_t i = 0; i < n; ++i) {
        if (!(prof.phi[i] > 0.0))
            throw NonKahlerProfile(prof.rho_grid[i], prof.phi[i], "phi");
        if (i + 1 < n && !(prof.phi[i + 1] > prof.phi[i]))
            throw NonKahlerProfile(prof.rho_grid[i + 1],
                                   prof.phi[i + 1] - prof.phi[i], "phi increment");
    }
}

double singular_time(const FlowParams& p) {
    validate(p);
    return p.a0 / static_cast<double>(p.n - p.k);
}

KahlerClass class_at(const FlowParams& p, double t) {
    validate(p);
    const double T = singular_time(p);
    const double t_max = p.b0 / static_cast<double>(p.n + p.k);
    if (t < 0.0 || t > t_max)
        throw std::invalid_argument("class_at: t outside [0, b0/(n+k)]");
    KahlerClass c;
    c.t = t;
    c.a_t = t <= T ? p.a0 + static_cast<double>(p.k - p.n) * t : 0.0;
    c.b_t = p.b0 - static_cast<double>(p.k + p.n) * t;
    return c;
}

AmbientHessian metric_eigenvalues(const RadialProfile& prof, double rho) {
    const std::size_t n = prof.phi.size();
    const double h = grid_spacing(prof);
    const double pos = (rho - prof.rho_grid.front()) / h;
    const auto i = static_cast<std::ptrdiff_t>(std::lround(pos));
    if (i < 1 || i >= static_cast<std::ptrdiff_t>(n) - 1)
        throw std::invalid_argument("metric_eigenvalues: rho not in the grid interior");
    const auto idx = static_cast<std::size_t>(i);

    const double phi = prof.phi[idx];
    const double dphi = fd_first_central(prof.phi, idx, h);
    const double at = prof.rho_grid[idx];
    if (!(phi > 0.0))
        throw NonKahlerProfile(at, phi, "phi");
    if (!(dphi > 0.0))
        throw NonKahlerProfile(at, dphi, "phi'");

    AmbientHessian out;
    out.lambda_sph = phi * std::exp(-at);
    out.lambda_rad = dphi * std::exp(-at);
    out.det = std::pow(phi, prof.n - 1) * dphi * std::exp(-static_cast<double>(prof.n) * at);
    out.at_rho = at;
    return out;
}

std::pair<double, double> boundary_class(const RadialProfile& prof) {
    if (prof.phi.size() < 8)
        throw std::invalid_argument("boundary_class: profile too short");
    // On the truncated grid the boundary value phi(rho_min) overshoots the
    // class coefficient a by the leading tail term c e^{k rho_min}; since the
    // tail order is pinned by the boundary closure, phi'(rho_min)/k recovers
    // that term exactly and the residual drops to the next exponential order.
    // Without this the area readout drifts by the tail term, which matters
    // near extinction where a itself is comparable to it.  Same at the far
    // end, where phi approaches b from below as b - C e^{-k rho}.
    const double h = grid_spacing(prof);
    const double kk = static_cast<double>(prof.k);
    double d0 = 0.0;
    if (prof.phase != Phase::OrbifoldY) {
        const double corr = fd_first_left(prof.phi, h) / kk;
        d0 = std::max(prof.phi.front() - corr, 0.0);
    }
    const double dinf = prof.phi.back() + fd_first_right(prof.phi, h) / kk;
    return {d0, dinf};
}

std::pair<double, double> smoothness_residual(const RadialProfile& prof) {
    const std::size_t n = prof.phi.size();
    if (n < 4)
        throw std::invalid_argument("smoothness_residual: profile too short");
    const double h = grid_spacing(prof);

    const double m_left = prof.phase == Phase::OrbifoldY ? 1.0
                                                         : static_cast<double>(prof.k);
    const double dl = fd_first_central(prof.phi, 1, h);
    const double ddl = fd_second_central(prof.phi, 1, h);
    const double dr = fd_first_central(prof.phi, n - 2, h);
    const double ddr = fd_second_central(prof.phi, n - 2, h);
    if (!(dl > 0.0))
        throw NonKahlerProfile(prof.rho_grid[1], dl, "phi'");
    if (!(dr > 0.0))
        throw NonKahlerProfile(prof.rho_grid[n - 2], dr, "phi'");

    return {std::abs(ddl / dl - m_left),
            std::abs(ddr / dr + static_cast<double>(prof.k))};
}

} // namespace krf
