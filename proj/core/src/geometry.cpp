#include "krf/geometry.hpp"
#include "krf/errors.hpp"
#include "krf/numerics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <stdexcept>

namespace krf {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Spline view of a profile: phi and phi' as smooth functions of rho.
struct ProfileView {
    CubicSpline phi;
    CubicSpline dphi;
    double lo, hi;

    explicit ProfileView(const RadialProfile& prof)
        : phi(prof.rho_grid, prof.phi),
          dphi(prof.rho_grid, phi_prime(prof)),
          lo(prof.rho_grid.front()),
          hi(prof.rho_grid.back()) {}

    double phi_at(double rho) const { return phi(clamp(rho)); }
    double dphi_at(double rho) const {
        const double d = dphi(clamp(rho));
        if (!(d > 0.0)) throw NonKahlerProfile(rho, d, "phi'");
        return d;
    }
    double clamp(double rho) const { return std::min(std::max(rho, lo), hi); }
};

double simpson_of(const std::function<double(double)>& f, double a, double b,
                  std::size_t samples) {
    if (b <= a) return 0.0;
    const double h = (b - a) / static_cast<double>(samples - 1);
    std::vector<double> ys(samples);
    for (std::size_t i = 0; i < samples; ++i)
        ys[i] = f(a + h * static_cast<double>(i));
    return simpson_uniform(ys, h);
}

void require_in_domain(const RadialProfile& prof, double rho, const char* what) {
    const double tol = 1e-9 * (1.0 + std::abs(rho));
    if (rho < prof.rho_grid.front() - tol || rho > prof.rho_grid.back() + tol)
        throw InvalidGeometry(std::string(what) + ": rho = " + std::to_string(rho) +
                              " outside the grid domain");
}

} // namespace

// ---------------------------------------------------------------------------
// Lengths
// ---------------------------------------------------------------------------

double radial_length(const RadialProfile& prof, double rho_a, double rho_b) {
    if (rho_a > rho_b)
        throw InvalidGeometry("radial_length: rho_a > rho_b");
    require_in_domain(prof, rho_a, "radial_length");
    require_in_domain(prof, rho_b, "radial_length");
    if (rho_b - rho_a < 1e-15) return 0.0;
    const ProfileView view(prof);
    return simpson_of([&](double r) { return std::sqrt(view.dphi_at(r) / 2.0); },
                      rho_a, rho_b, 513);
}

double hopf_circle_length(const RadialProfile& prof, double rho, int quotient_k) {
    if (quotient_k < 1)
        throw InvalidGeometry("hopf_circle_length: quotient_k must be >= 1");
    require_in_domain(prof, rho, "hopf_circle_length");
    const ProfileView view(prof);
    return 2.0 * kPi * std::sqrt(2.0 * view.dphi_at(rho)) /
           static_cast<double>(quotient_k);
}

double sphere_diameter_upper(const RadialProfile& prof, double rho,
                             int quotient_k) {
    if (quotient_k < 1)
        throw InvalidGeometry("sphere_diameter_upper: quotient_k must be >= 1");
    require_in_domain(prof, rho, "sphere_diameter_upper");
    const ProfileView view(prof);
    return kPi * std::sqrt(2.0 * view.phi_at(rho)) +
           kPi * std::sqrt(2.0 * view.dphi_at(rho)) / static_cast<double>(quotient_k);
}

// ---------------------------------------------------------------------------
// Structured paths
// ---------------------------------------------------------------------------

PathSegment PathSegment::radial(double rho_a, double rho_b) {
    PathSegment s;
    s.kind = Kind::Radial;
    s.rho_a = rho_a;
    s.rho_b = rho_b;
    return s;
}
PathSegment PathSegment::horizontal(double rho, double angle) {
    PathSegment s;
    s.kind = Kind::Horizontal;
    s.rho = rho;
    s.angle = angle;
    return s;
}
PathSegment PathSegment::hopf(double rho, double angle) {
    PathSegment s;
    s.kind = Kind::Hopf;
    s.rho = rho;
    s.angle = angle;
    return s;
}
PathSegment PathSegment::line_chord(double a, double s_a, double s_b) {
    PathSegment s;
    s.kind = Kind::LineChord;
    s.a = a;
    s.s_a = s_a;
    s.s_b = s_b;
    return s;
}

namespace {

double chord_length(const ProfileView& view, double a, double s_a, double s_b) {
    const double lo = std::min(s_a, s_b), hi = std::max(s_a, s_b);
    if (hi - lo < 1e-15) return 0.0;
    return simpson_of(
        [&](double s) {
            const double r2 = a * a + s * s;
            const double rho = std::log(r2);
            const double num =
                2.0 * (view.dphi_at(rho) * s * s + view.phi_at(rho) * a * a);
            return std::sqrt(num) / r2;
        },
        lo, hi, 257);
}

} // namespace

double path_length(const RadialProfile& prof, const PathSpec& spec,
                   int quotient_k) {
    if (quotient_k < 1)
        throw InvalidGeometry("path_length: quotient_k must be >= 1");
    const ProfileView view(prof);
    double total = 0.0;
    double rho_cur = std::numeric_limits<double>::quiet_NaN();
    auto chain = [&](double rho_start, const char* what) {
        if (!std::isnan(rho_cur) &&
            std::abs(rho_cur - rho_start) > 1e-9 * (1.0 + std::abs(rho_cur)))
            throw InvalidGeometry(std::string(what) +
                                  ": segment does not chain to the previous endpoint");
    };
    for (const auto& seg : spec.segments) {
        switch (seg.kind) {
        case PathSegment::Kind::Radial: {
            require_in_domain(prof, seg.rho_a, "path_length");
            require_in_domain(prof, seg.rho_b, "path_length");
            chain(seg.rho_a, "path_length (radial)");
            total += radial_length(prof, std::min(seg.rho_a, seg.rho_b),
                                   std::max(seg.rho_a, seg.rho_b));
            rho_cur = seg.rho_b;
            break;
        }
        case PathSegment::Kind::Horizontal: {
            require_in_domain(prof, seg.rho, "path_length");
            chain(seg.rho, "path_length (horizontal)");
            total += std::abs(seg.angle) * std::sqrt(2.0 * view.phi_at(seg.rho));
            rho_cur = seg.rho;
            break;
        }
        case PathSegment::Kind::Hopf: {
            require_in_domain(prof, seg.rho, "path_length");
            chain(seg.rho, "path_length (hopf)");
            if (std::abs(seg.angle) > 2.0 * kPi / quotient_k + 1e-12)
                throw InvalidGeometry("path_length: hopf angle exceeds a full quotient turn");
            total += std::abs(seg.angle) * std::sqrt(2.0 * view.dphi_at(seg.rho));
            rho_cur = seg.rho;
            break;
        }
        case PathSegment::Kind::LineChord: {
            if (!(seg.a > 0.0))
                throw InvalidGeometry("path_length: chord offset must be > 0");
            const double rho_start = std::log(seg.a * seg.a + seg.s_a * seg.s_a);
            const double rho_low = std::log(seg.a * seg.a);
            require_in_domain(prof, rho_low, "path_length (chord)");
            chain(rho_start, "path_length (chord)");
            total += chord_length(view, seg.a, seg.s_a, seg.s_b);
            rho_cur = std::log(seg.a * seg.a + seg.s_b * seg.s_b);
            break;
        }
        }
    }
    return total;
}

// ---------------------------------------------------------------------------
// Shortest-path mesh
// ---------------------------------------------------------------------------

namespace {

// Mesh over (rho-row) x (sigma in [0, pi]) x (beta layer), with an optional
// virtual node for the contracted point in Completion mode.  Edges are
// generated on the fly during the search.
struct Mesh {
    std::vector<double> row_rho, row_phi, row_dphi;
    std::vector<double> w_rho;   // between consecutive rows
    std::vector<double> w_sigma; // per row, one sigma step
    std::vector<double> w_beta;  // per row, layer transfer
    std::size_t rows = 0, sig_nodes = 0, layers = 1;
    bool has_tip = false;
    double tip_weight = 0.0;
    double max_edge = 0.0;

    std::size_t id(std::size_t row, std::size_t sig, std::size_t layer) const {
        return (layer * sig_nodes + sig) * rows + row;
    }
    std::size_t tip_id() const { return layers * sig_nodes * rows; }
    std::size_t node_count() const {
        return layers * sig_nodes * rows + (has_tip ? 1 : 0);
    }
};

Mesh build_mesh(const RadialProfile& prof, const MeshOptions& opts,
                double beta_gap, int quotient_k, bool completion) {
    if (opts.rho_stride < 1 || opts.angular_points < 8)
        throw MeshResolutionFailure("mesh: stride must be >= 1 and angular points >= 8");
    Mesh m;
    const std::size_t N = prof.rho_grid.size();
    const auto dphi = phi_prime(prof);
    for (std::size_t i = 0; i < N; i += opts.rho_stride) {
        m.row_rho.push_back(prof.rho_grid[i]);
        m.row_phi.push_back(prof.phi[i]);
        m.row_dphi.push_back(dphi[i]);
    }
    if (m.row_rho.back() != prof.rho_grid.back()) {
        m.row_rho.push_back(prof.rho_grid.back());
        m.row_phi.push_back(prof.phi.back());
        m.row_dphi.push_back(dphi.back());
    }
    m.rows = m.row_rho.size();
    m.sig_nodes = opts.angular_points + 1;
    m.layers = beta_gap > 1e-14 ? 2 : 1;

    for (std::size_t i = 0; i < m.rows; ++i) {
        if (!(m.row_dphi[i] > 0.0))
            throw NonKahlerProfile(m.row_rho[i], m.row_dphi[i], "phi'");
        m.w_sigma.push_back(std::sqrt(2.0 * m.row_phi[i]) * (kPi / opts.angular_points));
        m.w_beta.push_back(beta_gap * std::sqrt(2.0 * m.row_dphi[i]));
    }
    for (std::size_t i = 0; i + 1 < m.rows; ++i) {
        const double dr = m.row_rho[i + 1] - m.row_rho[i];
        m.w_rho.push_back(0.5 * (std::sqrt(m.row_dphi[i] / 2.0) +
                                 std::sqrt(m.row_dphi[i + 1] / 2.0)) * dr);
    }
    if (completion) {
        m.has_tip = true;
        m.tip_weight = std::sqrt(2.0 * m.row_phi.front());
    }
    for (double w : m.w_rho) m.max_edge = std::max(m.max_edge, w);
    for (double w : m.w_sigma) m.max_edge = std::max(m.max_edge, w);
    (void)quotient_k;
    return m;
}

std::vector<double> dijkstra(const Mesh& m, std::size_t src) {
    std::vector<double> dist(m.node_count(), std::numeric_limits<double>::infinity());
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
    dist[src] = 0.0;
    pq.push({0.0, src});
    while (!pq.empty()) {
        const auto [d, u] = pq.top();
        pq.pop();
        if (d > dist[u]) continue;
        auto relax = [&](std::size_t v, double w) {
            if (d + w < dist[v]) {
                dist[v] = d + w;
                pq.push({dist[v], v});
            }
        };
        if (m.has_tip && u == m.tip_id()) {
            for (std::size_t l = 0; l < m.layers; ++l)
                for (std::size_t s = 0; s < m.sig_nodes; ++s)
                    relax(m.id(0, s, l), m.tip_weight);
            continue;
        }
        const std::size_t row = u % m.rows;
        const std::size_t rest = u / m.rows;
        const std::size_t sig = rest % m.sig_nodes;
        const std::size_t layer = rest / m.sig_nodes;
        if (row + 1 < m.rows) relax(m.id(row + 1, sig, layer), m.w_rho[row]);
        if (row > 0) relax(m.id(row - 1, sig, layer), m.w_rho[row - 1]);
        if (sig + 1 < m.sig_nodes) relax(m.id(row, sig + 1, layer), m.w_sigma[row]);
        if (sig > 0) relax(m.id(row, sig - 1, layer), m.w_sigma[row]);
        if (m.layers == 2) relax(m.id(row, sig, 1 - layer), m.w_beta[row]);
        if (m.has_tip && row == 0) relax(m.tip_id(), m.tip_weight);
    }
    return dist;
}

std::size_t snap_row(const Mesh& m, double rho) {
    const auto it = std::lower_bound(m.row_rho.begin(), m.row_rho.end(), rho);
    if (it == m.row_rho.begin()) return 0;
    if (it == m.row_rho.end()) return m.rows - 1;
    const std::size_t hi = static_cast<std::size_t>(it - m.row_rho.begin());
    return (rho - m.row_rho[hi - 1] <= m.row_rho[hi] - rho) ? hi - 1 : hi;
}

// Minimal Hopf angle between two fiber phases on the Z_k quotient.
double beta_gap_effective(double beta_p, double beta_q, int k) {
    const double period = 2.0 * kPi / static_cast<double>(k);
    double d = std::fmod(std::abs(beta_q - beta_p), period);
    if (d < 0.0) d += period;
    return std::min(d, period - d);
}

} // namespace

DistanceResult distance_upper(const RadialProfile& prof, const DistanceQuery& query,
                              const MeshOptions& opts) {
    require_in_domain(prof, query.p.rho, "distance_upper");
    require_in_domain(prof, query.q.rho, "distance_upper");
    const int k_quot = std::max(prof.k, 1);

    if (query.mode == DistanceMode::LowerBound) {
        const double a = std::min(query.p.rho, query.q.rho);
        const double b = std::max(query.p.rho, query.q.rho);
        if (b - a < 1e-15) return {0.0, 0.0};
        const ProfileView view(prof);
        const double v = simpson_of(
            [&](double r) {
                return std::sqrt(std::min(view.phi_at(r), view.dphi_at(r)) / 2.0);
            },
            a, b, 513);
        return {v, 0.0};
    }

    if (std::abs(query.p.rho - query.q.rho) < 1e-15 &&
        std::abs(query.p.sigma - query.q.sigma) < 1e-15 &&
        std::abs(query.p.beta - query.q.beta) < 1e-15)
        return {0.0, 0.0};

    const double bgap = beta_gap_effective(query.p.beta, query.q.beta, k_quot);
    const bool completion = query.mode == DistanceMode::Completion;
    const Mesh mesh = build_mesh(prof, opts, bgap, k_quot, completion);
    if (mesh.max_edge > opts.tolerance)
        throw MeshResolutionFailure("distance_upper: mesh slack " +
                                    std::to_string(mesh.max_edge) +
                                    " exceeds the requested tolerance");

    auto snap = [&](const SpherePoint& pt, std::size_t layer, double& penalty) {
        const std::size_t row = snap_row(mesh, pt.rho);
        const double sig = std::min(std::max(pt.sigma, 0.0), kPi);
        const double dsig = kPi / static_cast<double>(mesh.sig_nodes - 1);
        const std::size_t si =
            static_cast<std::size_t>(std::lround(sig / dsig));
        // Realized connector: a short radial leg plus a short rotation.
        penalty = radial_length(prof, std::min(pt.rho, mesh.row_rho[row]),
                                std::max(pt.rho, mesh.row_rho[row])) +
                  std::abs(sig - static_cast<double>(si) * dsig) *
                      std::sqrt(2.0 * mesh.row_phi[row]);
        return mesh.id(row, std::min(si, mesh.sig_nodes - 1), layer);
    };

    double pen_p = 0.0, pen_q = 0.0;
    const std::size_t src = snap(query.p, 0, pen_p);
    const std::size_t dst = snap(query.q, mesh.layers - 1, pen_q);
    const auto dist = dijkstra(mesh, src);
    const double d = dist[dst];
    if (!std::isfinite(d))
        throw MeshResolutionFailure("distance_upper: target unreachable on the mesh");
    return {d + pen_p + pen_q, mesh.max_edge};
}

std::vector<SpherePoint> correspondence_sample(double rho_lo, double rho_hi,
                                               int quotient_k) {
    const double beta1 = kPi / static_cast<double>(std::max(quotient_k, 1));
    const std::array<double, 4> rhos{rho_lo, rho_lo / 2.0, std::min(0.0, rho_hi),
                                     rho_hi / 2.0};
    const std::array<std::pair<double, double>, 3> angles{
        std::make_pair(0.0, 0.0), std::make_pair(kPi / 2.0, 0.0),
        std::make_pair(kPi / 4.0, beta1)};
    std::vector<SpherePoint> pts;
    for (double r : rhos)
        for (const auto& [sg, bt] : angles) pts.push_back({r, sg, bt});
    return pts;
}

namespace {

// All pairwise mesh distances between the sample points.  The sample is
// snapped to mesh nodes, so two profiles on the same grid see identical
// points.  Returns the distance matrix and the mesh slack.
std::pair<std::vector<std::vector<double>>, double>
sample_pair_distances(const RadialProfile& prof, const std::vector<SpherePoint>& pts,
                      const MeshOptions& opts) {
    const int k_quot = std::max(prof.k, 1);
    const double bgap =
        beta_gap_effective(0.0, kPi / static_cast<double>(k_quot), k_quot);
    const bool completion = prof.phase == Phase::OrbifoldY;
    const Mesh mesh = build_mesh(prof, opts, bgap, k_quot, completion);
    const double dsig = kPi / static_cast<double>(mesh.sig_nodes - 1);
    std::vector<std::size_t> ids;
    for (const auto& pt : pts) {
        const std::size_t row = snap_row(mesh, pt.rho);
        const std::size_t si = std::min(
            static_cast<std::size_t>(std::lround(pt.sigma / dsig)), mesh.sig_nodes - 1);
        const std::size_t layer = pt.beta > 1e-14 && mesh.layers == 2 ? 1 : 0;
        ids.push_back(mesh.id(row, si, layer));
    }
    std::vector<std::vector<double>> d(pts.size(),
                                       std::vector<double>(pts.size(), 0.0));
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto dist = dijkstra(mesh, ids[i]);
        for (std::size_t j = 0; j < pts.size(); ++j) d[i][j] = dist[ids[j]];
    }
    return {d, mesh.max_edge};
}

} // namespace

GhResult gh_distortion(const RadialProfile& prof_t, const RadialProfile& prof_T,
                       const MeshOptions& opts) {
    const int k_quot = std::max(prof_t.k, 1);
    const double lo = std::max(prof_t.rho_grid.front(), prof_T.rho_grid.front());
    const double hi = std::min(prof_t.rho_grid.back(), prof_T.rho_grid.back());
    const auto pts = correspondence_sample(lo, hi, k_quot);

    const auto [dt, slack_t] = sample_pair_distances(prof_t, pts, opts);
    const auto [dT, slack_T] = sample_pair_distances(prof_T, pts, opts);
    GhResult out;
    out.slack = slack_t + slack_T;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j)
            out.distortion = std::max(out.distortion, std::abs(dt[i][j] - dT[i][j]));
    return out;
}

std::pair<std::vector<std::vector<double>>, double>
sample_distance_matrix(const RadialProfile& prof,
                       const std::vector<SpherePoint>& pts,
                       const MeshOptions& opts) {
    return sample_pair_distances(prof, pts, opts);
}

double sample_diameter(const RadialProfile& prof, const MeshOptions& opts) {
    const auto pts = correspondence_sample(prof.rho_grid.front(),
                                           prof.rho_grid.back(),
                                           std::max(prof.k, 1));
    const auto [d, slack] = sample_pair_distances(prof, pts, opts);
    (void)slack;
    double diam = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j)
            diam = std::max(diam, d[i][j]);
    return diam;
}

// ---------------------------------------------------------------------------
// Integral geometry
// ---------------------------------------------------------------------------

double line_disk_integral(const RadialProfile& prof, double r, double theta,
                          double eta_max) {
    if (!(r > 0.0))
        throw InvalidGeometry("line_disk_integral: r must be > 0");
    if (!(eta_max >= 0.0) || eta_max >= kPi / 2.0)
        throw InvalidGeometry("line_disk_integral: eta_max must lie in [0, pi/2)");
    const double a = 2.0 * r * std::cos(theta);
    if (!(a > 0.0))
        throw InvalidGeometry("line_disk_integral: need cos(theta) > 0");
    if (eta_max == 0.0) return 0.0;
    const double r0 = a * std::tan(eta_max);
    if (std::log(a * a) < prof.rho_grid.front())
        throw QuadratureFailure(
            "line_disk_integral: disk dips below the grid domain");

    const ProfileView view(prof);
    auto radial_part = [&](double s) {
        const double r2 = a * a + s * s;
        const double rho = std::log(r2);
        return 2.0 * (view.dphi_at(rho) * s * s + view.phi_at(rho) * a * a) /
               (r2 * r2) * s; // polar Jacobian
    };
    // Tensor Simpson in (s, v); the integrand is v-independent but the
    // quadrature is kept two-dimensional to mirror the surface integral.
    const std::size_t Ms = 257, Mv = 65;
    const double hs = r0 / static_cast<double>(Ms - 1);
    const double hv = 2.0 * kPi / static_cast<double>(Mv - 1);
    std::vector<double> vs(Mv, 1.0);
    std::vector<double> inner(Ms);
    for (std::size_t i = 0; i < Ms; ++i)
        inner[i] = radial_part(hs * static_cast<double>(i));
    const double s_integral = simpson_uniform(inner, hs);
    const double v_integral = simpson_uniform(vs, hv); // = 2 pi
    return s_integral * v_integral;
}

TildeVolume tilde_volume_F(double r, double theta, double eta_max, double delta) {
    if (!(r > 0.0))
        throw InvalidGeometry("tilde_volume_F: r must be > 0");
    if (!(eta_max > 0.0) || eta_max >= kPi / 6.0)
        throw InvalidGeometry("tilde_volume_F: eta_max must lie in (0, pi/6)");
    if (!(delta > 0.0) || delta > 1.0)
        throw InvalidGeometry("tilde_volume_F: delta must lie in (0, 1]");
    const double ct = std::cos(theta);
    if (!(ct > 0.0))
        throw InvalidGeometry("tilde_volume_F: need cos(theta) > 0");

    const double R = 2.0 * r * ct / std::cos(eta_max);
    TildeVolume out;
    out.closed_form = (2.0 * kPi / delta) * std::sin(eta_max) * std::pow(R, delta);

    // Independent surface quadrature: embed the cone surface in R^3 as
    // z(tau, v) = R tau xhat(v) with xhat on the circle of opening angle
    // eta_max, differentiate the embedding by finite differences, and
    // evaluate the induced area of the conical comparison metric
    //   g(w, w') = rho^{-2(1-delta)} <xhat,w><xhat,w'> + <w_perp, w'_perp>/rho^2.
    auto xhat = [&](double v) {
        return std::array<double, 3>{std::cos(eta_max), std::sin(eta_max) * std::cos(v),
                                     std::sin(eta_max) * std::sin(v)};
    };
    auto embed = [&](double tau, double v) {
        const auto x = xhat(v);
        return std::array<double, 3>{R * tau * x[0], R * tau * x[1], R * tau * x[2]};
    };
    auto dot = [](const std::array<double, 3>& a, const std::array<double, 3>& b) {
        return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    };

    auto area_density = [&](double tau, double v) {
        const auto z = embed(tau, v);
        const double rho = std::sqrt(dot(z, z));
        const std::array<double, 3> rad{z[0] / rho, z[1] / rho, z[2] / rho};
        const double ht = 1e-6 * tau, hv = 1e-6;
        const auto zp = embed(tau + ht, v), zm = embed(tau - ht, v);
        const auto yp = embed(tau, v + hv), ym = embed(tau, v - hv);
        std::array<double, 3> wt, wv;
        for (int i = 0; i < 3; ++i) {
            wt[i] = (zp[i] - zm[i]) / (2.0 * ht);
            wv[i] = (yp[i] - ym[i]) / (2.0 * hv);
        }
        const double rad_factor = std::pow(rho, -2.0 * (1.0 - delta));
        auto metric = [&](const std::array<double, 3>& u,
                          const std::array<double, 3>& w) {
            const double ur = dot(u, rad), wr = dot(w, rad);
            std::array<double, 3> up, wp;
            for (int i = 0; i < 3; ++i) {
                up[i] = u[i] - ur * rad[i];
                wp[i] = w[i] - wr * rad[i];
            }
            return rad_factor * ur * wr + dot(up, wp) / (rho * rho);
        };
        const double gtt = metric(wt, wt), gvv = metric(wv, wv), gtv = metric(wt, wv);
        return std::sqrt(std::max(gtt * gvv - gtv * gtv, 0.0));
    };

    // Geometric panels in tau resolve the tau^{delta-1} endpoint; the
    // leftover mass below 2^{-J} is below 2^{-26} relative.
    const int J = static_cast<int>(std::ceil(26.0 / delta));
    double total = 0.0;
    const int v_panels = 12;
    for (int jv = 0; jv < v_panels; ++jv) {
        const double va = 2.0 * kPi * jv / v_panels;
        const double vb = 2.0 * kPi * (jv + 1) / v_panels;
        total += gauss_legendre_panels(
            [&](double v) {
                double inner = 0.0;
                for (int j = 0; j < J; ++j) {
                    const double ta = std::pow(2.0, -(j + 1));
                    const double tb = std::pow(2.0, -j);
                    inner += gauss_legendre_panels(
                        [&](double tau) { return area_density(tau, v); }, ta, tb, 1);
                }
                return inner;
            },
            va, vb, 1);
    }
    out.quadrature = total;
    return out;
}

// ---------------------------------------------------------------------------
// Pointwise Hessian data and the wedge inequality
// ---------------------------------------------------------------------------

FullHessian full_hessian_at(const RadialProfile& prof, double rho,
                            const std::vector<std::complex<double>>& zhat) {
    if (zhat.size() != static_cast<std::size_t>(prof.n))
        throw InvalidGeometry("full_hessian_at: zhat dimension mismatch");
    double norm2 = 0.0;
    for (const auto& z : zhat) norm2 += std::norm(z);
    if (!(norm2 > 0.0))
        throw InvalidGeometry("full_hessian_at: zhat must be nonzero");
    const auto eig = metric_eigenvalues(prof, rho);
    FullHessian G;
    G.n = prof.n;
    G.zhat = zhat;
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& z : G.zhat) z *= inv;
    G.lambda_sph = eig.lambda_sph;
    G.lambda_rad = eig.lambda_rad;
    return G;
}

std::complex<double> hermitian_product(const FullHessian& G,
                                       const std::vector<std::complex<double>>& u,
                                       const std::vector<std::complex<double>>& v) {
    const std::size_t n = static_cast<std::size_t>(G.n);
    if (u.size() != n || v.size() != n || G.zhat.size() != n)
        throw InvalidGeometry("hermitian_product: dimension mismatch");
    std::complex<double> uv = 0.0, uz = 0.0, zv = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        uv += u[i] * std::conj(v[i]);
        uz += u[i] * std::conj(G.zhat[i]);
        zv += G.zhat[i] * std::conj(v[i]);
    }
    return G.lambda_sph * uv + (G.lambda_rad - G.lambda_sph) * uz * zv;
}

double metric_g(const FullHessian& G, const std::vector<std::complex<double>>& u,
                const std::vector<std::complex<double>>& v) {
    return 2.0 * hermitian_product(G, u, v).real();
}

double kahler_omega(const FullHessian& G, const std::vector<std::complex<double>>& u,
                    const std::vector<std::complex<double>>& v) {
    return -2.0 * hermitian_product(G, u, v).imag();
}

double wedge_bound_check(const FullHessian& G,
                         const std::vector<std::complex<double>>& e,
                         const std::vector<std::complex<double>>& e_prime) {
    const double tol = 1e-10;
    if (std::abs(metric_g(G, e, e) - 1.0) > tol ||
        std::abs(metric_g(G, e_prime, e_prime) - 1.0) > tol ||
        std::abs(metric_g(G, e, e_prime)) > tol)
        throw InvalidGeometry("wedge_bound_check: inputs are not g-orthonormal");
    return std::abs(kahler_omega(G, e, e_prime));
}

} // namespace krf
