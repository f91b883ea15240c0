#include "krf/estimates.hpp"
#include "krf/errors.hpp"
#include "krf/geometry.hpp"
#include "krf/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace krf {

namespace {

constexpr double kPi = 3.14159265358979323846;

double delta_of(int k) { return static_cast<double>(k) / (k + 1.0); }

// Trace window for rate fits: the middle [10%, 90%] of the run, away from
// startup transients and the halting layer.
void middle_window(const std::vector<TraceSample>& trace, std::vector<double>& ts,
                   std::vector<double>& d0, std::vector<double>& dinf) {
    if (trace.size() < 16)
        throw InsufficientData("rate fit: trace too short");
    const double t0 = trace.front().t, t1 = trace.back().t;
    const double lo = t0 + 0.1 * (t1 - t0), hi = t0 + 0.9 * (t1 - t0);
    for (const auto& s : trace) {
        if (s.t < lo || s.t > hi) continue;
        ts.push_back(s.t);
        d0.push_back(s.area_d0);
        dinf.push_back(s.area_dinf);
    }
    if (ts.size() < 8)
        throw InsufficientData("rate fit: too few samples in the fit window");
}

} // namespace

bool EstimateReport::all_pass() const {
    for (const auto& c : checks)
        if (!c.pass) return false;
    return true;
}

const EstimateCheck* EstimateReport::find(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

std::pair<double, double> fit_exponent(const std::vector<double>& xs,
                                       const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 4)
        throw FitDegeneracy("fit_exponent: need at least 4 matched points");
    std::vector<double> lx(xs.size()), ly(ys.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!(xs[i] > 0.0) || !(ys[i] > 0.0))
            throw FitDegeneracy("fit_exponent: data must be strictly positive");
        lx[i] = std::log(xs[i]);
        ly[i] = std::log(ys[i]);
    }
    const auto fit = fit_line(lx, ly);
    return {fit.slope, fit.slope_stderr};
}

EstimateCheck check_trace_bound(const FlowTrajectory& traj) {
    EstimateCheck c;
    c.name = "trace_bound";
    c.paper_ref = "near-divisor upper bound on the metric trace";
    c.threshold = 10.0;
    if (traj.snapshots.empty())
        throw InsufficientData("check_trace_bound: no snapshots");
    double m0 = 0.0, worst = 0.0;
    for (std::size_t s = 0; s < traj.snapshots.size(); ++s) {
        const auto& prof = traj.snapshots[s];
        const auto dphi = phi_prime(prof);
        double m = 0.0;
        for (std::size_t i = 0; i < prof.rho_grid.size(); ++i) {
            if (prof.rho_grid[i] > 0.0) break;
            m = std::max(m, std::max(prof.phi[i], dphi[i]));
        }
        if (s == 0) m0 = m;
        worst = std::max(worst, m);
    }
    c.measured = worst / m0;
    c.pass = std::isfinite(c.measured) && c.measured <= c.threshold;
    return c;
}

EstimateCheck check_radial_exponent(const FlowTrajectory& traj) {
    EstimateCheck c;
    c.name = "radial_exponent";
    c.paper_ref = "radial derivative decay order at the singular time";
    if (traj.snapshots.empty())
        throw InsufficientData("check_radial_exponent: no snapshots");
    const auto& prof = traj.snapshots.back();
    const double delta = delta_of(prof.k);
    c.threshold = delta - 0.05;

    const auto dphi = phi_prime(prof);
    std::vector<double> xs, ys;
    const double lo = prof.rho_grid.front() + 2.0, hi = -2.0;
    for (std::size_t i = 0; i < prof.rho_grid.size(); ++i) {
        const double rho = prof.rho_grid[i];
        if (rho < lo || rho > hi) continue;
        xs.push_back(std::exp(rho));
        ys.push_back(dphi[i]);
    }
    const auto [alpha, err] = fit_exponent(xs, ys);
    c.fitted_exponent = alpha;
    c.fit_stderr = err;

    // Radial-length ladder L(r) <= C r^delta: the calibrated constant must
    // be finite.
    double c_len = 0.0;
    const double rho_min = prof.rho_grid.front();
    for (int j = 0; j < 8; ++j) {
        const double rho = lo + (hi - lo) * j / 7.0;
        const double r = std::exp(rho / 2.0);
        const double L = radial_length(prof, rho_min, rho);
        c_len = std::max(c_len, L / std::pow(r, delta));
    }
    c.measured = c_len;
    c.pass = std::isfinite(c_len) && c_len > 0.0 && alpha >= c.threshold;
    return c;
}

std::vector<EstimateCheck> check_divisor_decay(const FlowTrajectory& traj) {
    const double T = detect_extinction(traj);
    const double a0 = traj.params.a0;
    const double nk = static_cast<double>(traj.params.n - traj.params.k);

    EstimateCheck area;
    area.name = "area_law_slope";
    area.paper_ref = "linear decay law of the zero-section area";
    area.threshold = 0.005;
    {
        std::vector<double> xs, ys;
        for (const auto& s : traj.trace) {
            if (s.area_d0 > 0.1 * a0 || s.t >= T) continue;
            xs.push_back(T - s.t);
            ys.push_back(s.area_d0);
        }
        if (xs.size() < 8)
            throw InsufficientData("area law: too few trace samples in the last decade");
        const auto fit = fit_line(xs, ys);
        area.measured = fit.slope;
        area.pass = std::abs(fit.slope - nk) / nk <= area.threshold;
    }

    EstimateCheck diam;
    diam.name = "divisor_diameter_bound";
    diam.paper_ref = "cube-root collapse bound for the divisor diameter";
    diam.threshold = 1.0 / 3.0 - 0.02;
    {
        std::vector<double> xs, ys;
        for (const auto& prof : traj.snapshots) {
            const double gap = T - prof.t;
            if (gap <= 0.0 || gap > 0.1 * T + 1e-12) continue;
            xs.push_back(gap);
            ys.push_back(kPi * std::sqrt(2.0 * prof.phi.front()));
        }
        if (xs.size() < 10)
            throw InsufficientData(
                "diameter law: need at least 10 snapshots in the last decade");
        const auto [beta, err] = fit_exponent(xs, ys);
        diam.fitted_exponent = beta;
        diam.fit_stderr = err;
        // Calibrate at the coarsest scale (largest T - t) and require the
        // cube-root envelope to dominate every finer scale.
        std::size_t coarse = 0;
        for (std::size_t i = 1; i < xs.size(); ++i)
            if (xs[i] > xs[coarse]) coarse = i;
        const double C = ys[coarse] / std::cbrt(xs[coarse]);
        diam.measured = C;
        bool dominated = true;
        for (std::size_t i = 0; i < xs.size(); ++i)
            if (ys[i] > C * std::cbrt(xs[i]) * (1.0 + 1e-9)) dominated = false;
        diam.pass = beta >= diam.threshold && dominated;
    }
    return {area, diam};
}

EstimateCheck check_annulus_diameter(const RadialProfile& prof_T) {
    EstimateCheck c;
    c.name = "annulus_diameter";
    c.paper_ref = "annulus diameter bound with exponent delta/3";
    const double delta = delta_of(prof_T.k);
    c.threshold = delta / 3.0;

    // The scaling law is a small-radius statement about the collapsing
    // region: the annulus |z| in [r, 4r] must sit inside the unit ball,
    // so the six-rung ladder starts at r = 1/4 (4r = 1) and descends.
    const double h = grid_spacing(prof_T);
    std::vector<double> rs, diams;
    for (int j = 2; j <= 7; ++j) {
        const double r = std::pow(2.0, -j);
        const double lo = std::log(r * r), hi = lo + std::log(16.0);
        if (lo < prof_T.rho_grid.front() || hi > prof_T.rho_grid.back())
            throw InvalidGeometry("check_annulus_diameter: ladder exits the grid");

        RadialProfile slice;
        slice.phase = prof_T.phase;
        slice.t = prof_T.t;
        slice.n = prof_T.n;
        slice.k = prof_T.k;
        for (std::size_t i = 0; i < prof_T.rho_grid.size(); ++i) {
            const double rho = prof_T.rho_grid[i];
            if (rho < lo - h || rho > hi + h) continue;
            slice.rho_grid.push_back(rho);
            slice.phi.push_back(prof_T.phi[i]);
        }

        const double s_lo = slice.rho_grid.front(), s_hi = slice.rho_grid.back();
        const double beta1 = kPi / std::max(prof_T.k, 1);
        const std::vector<SpherePoint> pts{
            {s_lo, 0.0, 0.0},      {s_lo, kPi / 2.0, beta1},
            {0.5 * (s_lo + s_hi), 0.0, 0.0}, {0.5 * (s_lo + s_hi), kPi / 2.0, beta1},
            {s_hi, 0.0, 0.0},      {s_hi, kPi / 2.0, beta1}};
        MeshOptions opts;
        opts.rho_stride = std::max<std::size_t>(1, slice.rho_grid.size() / 64);
        opts.angular_points = 64;
        double diam = 0.0;
        for (std::size_t a = 0; a < pts.size(); ++a)
            for (std::size_t b = a + 1; b < pts.size(); ++b) {
                DistanceQuery q{pts[a], pts[b], DistanceMode::UpperBound};
                diam = std::max(diam, distance_upper(slice, q, opts).bound);
            }
        rs.push_back(r);
        diams.push_back(diam);
    }

    const auto [expo, err] = fit_exponent(rs, diams);
    c.fitted_exponent = expo;
    c.fit_stderr = err;
    const double C = diams.front() / std::pow(rs.front(), delta / 3.0);
    c.measured = C;
    c.pass = true;
    for (std::size_t i = 0; i < rs.size(); ++i)
        if (diams[i] > C * std::pow(rs[i], delta / 3.0) * (1.0 + 1e-9)) c.pass = false;
    return c;
}

EstimateCheck check_restriction_bound(const FlowTrajectory& traj) {
    EstimateCheck c;
    c.name = "restriction_bound";
    c.paper_ref = "monotone bound on the divisor restriction";
    c.threshold = 1.01;
    if (traj.snapshots.empty())
        throw InsufficientData("check_restriction_bound: no snapshots");
    const double base = traj.snapshots.front().phi.front();
    double worst = 0.0, prev = std::numeric_limits<double>::infinity();
    bool monotone = true;
    for (const auto& prof : traj.snapshots) {
        const double ratio = prof.phi.front() / base;
        worst = std::max(worst, ratio);
        if (ratio > prev + 1e-6) monotone = false;
        prev = ratio;
    }
    c.measured = worst;
    c.pass = worst <= c.threshold && monotone;
    return c;
}

EstimateCheck check_lower_bound(const FlowTrajectory& traj) {
    EstimateCheck c;
    c.name = "lower_bound";
    c.paper_ref = "uniform lower bound against the blow-down reference metric";
    c.threshold = 0.01;
    if (traj.snapshots.empty())
        throw InsufficientData("check_lower_bound: no snapshots");
    const double b0 = traj.params.b0;
    const int k = traj.params.k;

    auto c_of = [&](const RadialProfile& prof) {
        const auto dphi = phi_prime(prof);
        double cmin = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < prof.rho_grid.size(); ++i) {
            const double rho = prof.rho_grid[i];
            const double ref = fubini_type_profile(b0, k, rho);
            const double dref = static_cast<double>(k) * ref * (1.0 - ref / b0);
            cmin = std::min(cmin, std::min(prof.phi[i] / ref, dphi[i] / dref));
        }
        return cmin;
    };

    const double c0 = c_of(traj.snapshots.front());
    double cinf = std::numeric_limits<double>::infinity();
    for (const auto& prof : traj.snapshots) cinf = std::min(cinf, c_of(prof));
    c.measured = cinf / c0;
    c.pass = std::isfinite(c.measured) && c.measured >= c.threshold;
    return c;
}

namespace {

// Calibrated constant for  det G_eps >= (1/C) e^{(n-k) rho} det G_0.
double eps_volume_constant(const FlowTrajectory& eps_traj,
                           const RadialProfile& base_prof) {
    const int n = base_prof.n, k = base_prof.k;
    const auto dphi0 = phi_prime(base_prof);
    std::vector<double> target(base_prof.rho_grid.size());
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double rho = base_prof.rho_grid[i];
        const double det0 = std::pow(base_prof.phi[i], n - 1) * dphi0[i] *
                            std::exp(-static_cast<double>(n) * rho);
        target[i] = std::exp(static_cast<double>(n - k) * rho) * det0;
    }
    double C = 0.0;
    for (const auto& prof : eps_traj.snapshots) {
        const auto dphi = phi_prime(prof);
        for (std::size_t i = 0; i < prof.rho_grid.size(); ++i) {
            const double rho = prof.rho_grid[i];
            const double det = std::pow(prof.phi[i], n - 1) * dphi[i] *
                               std::exp(-static_cast<double>(n) * rho);
            C = std::max(C, target[i] / det);
        }
    }
    return C;
}

} // namespace

EstimateCheck check_eps_volume_bound(const FlowTrajectory& eps_traj,
                                     const RadialProfile& base_prof) {
    EstimateCheck c;
    c.name = "eps_volume_bound";
    c.paper_ref = "volume lower bound of the regularized flow";
    c.measured = eps_volume_constant(eps_traj, base_prof);
    c.threshold = 0.0;
    c.pass = std::isfinite(c.measured) && c.measured > 0.0;
    return c;
}

EstimateCheck check_eps_volume_bound_family(const std::vector<FlowTrajectory>& eps_trajs,
                                            const RadialProfile& base_prof) {
    EstimateCheck c;
    c.name = "eps_volume_bound_uniform";
    c.paper_ref = "uniform volume lower bound across the regularization family";
    c.threshold = 2.0;
    if (eps_trajs.empty())
        throw InsufficientData("eps volume bound: empty family");
    double cmin = std::numeric_limits<double>::infinity(), cmax = 0.0;
    for (const auto& traj : eps_trajs) {
        const double C = eps_volume_constant(traj, base_prof);
        if (!std::isfinite(C) || C <= 0.0) {
            c.measured = C;
            c.pass = false;
            return c;
        }
        cmin = std::min(cmin, C);
        cmax = std::max(cmax, C);
    }
    c.measured = cmax;
    c.pass = cmax / cmin <= c.threshold;
    return c;
}

std::vector<EstimateCheck> check_boundary_rates(const FlowTrajectory& traj) {
    std::vector<double> ts, d0, dinf;
    middle_window(traj.trace, ts, d0, dinf);
    const double k = traj.params.k, n = traj.params.n;

    EstimateCheck zero;
    zero.name = "boundary_rate_zero_section";
    zero.paper_ref = "emergent decay rate of the zero-section area";
    zero.threshold = 0.01;
    const auto fit0 = fit_line(ts, d0);
    zero.measured = fit0.slope;
    zero.pass = std::abs(fit0.slope - (k - n)) / std::abs(k - n) <= zero.threshold;

    EstimateCheck inf;
    inf.name = "boundary_rate_infinity_section";
    inf.paper_ref = "emergent decay rate of the infinity-section area";
    inf.threshold = 0.01;
    const auto fitI = fit_line(ts, dinf);
    inf.measured = fitI.slope;
    inf.pass = std::abs(fitI.slope - (-(k + n))) / (k + n) <= inf.threshold;

    return {zero, inf};
}

EstimateCheck check_orbifold_rate(const FlowTrajectory& y_traj) {
    EstimateCheck c;
    c.name = "orbifold_rate_infinity_section";
    c.paper_ref = "infinity-section rate along the blow-down continuation";
    c.threshold = 0.02;
    std::vector<double> ts, d0, dinf;
    middle_window(y_traj.trace, ts, d0, dinf);
    const double k = y_traj.params.k, n = y_traj.params.n;
    const auto fit = fit_line(ts, dinf);
    c.measured = fit.slope;
    c.pass = std::abs(fit.slope - (-(k + n))) / (k + n) <= c.threshold;
    return c;
}

} // namespace krf
