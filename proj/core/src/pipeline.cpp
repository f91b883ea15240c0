#include "krf/pipeline.hpp"

#include "krf/errors.hpp"
#include "krf/geometry.hpp"
#include "krf/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace krf {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// In-memory run state
// ---------------------------------------------------------------------------

struct EpsRun {
    double eps = 0.0;
    std::string tag;
    FlowTrajectory traj;
    RadialProfile psi;
};

struct RunData {
    RunConfig cfg;
    std::string id;
    double T_nom = 0.0;  // nominal singular time a0 / (n - k)
    double t_halt = 0.0; // scheduled halt T_nom (1 - stop_threshold)
    FlowTrajectory x;    // total-space phase
    FlowTrajectory xext; // optional deeper total-space run for small eps starts
    FlowTrajectory y;    // blow-down continuation
    std::vector<EpsRun> eps;
};

// Everything build_report measures that the artifact writer also exports.
struct GhPoint {
    double t = 0.0;
    double distortion = 0.0;
    double slack = 0.0;
};

struct ReportBundle {
    EstimateReport report;
    std::vector<SpherePoint> sample_pts;
    std::vector<std::vector<double>> dist0; // pairwise bounds on the initial metric
    double dist0_slack = 0.0;
    std::vector<GhPoint> gh_series;
    std::vector<std::array<double, 2>> diam_series; // (T - t, divisor diameter)
    std::vector<double> eps_vals, eps_gaps, psi_gaps, psi_residuals;
};

// ---------------------------------------------------------------------------
// Small helpers
// ---------------------------------------------------------------------------

// Snapshot times t_j = T (1 - 10^{-1 - j/10}), j = 0..20: the final measured
// decade, ten points per factor of ten in T - t.
std::vector<double> decade_times(double T) {
    std::vector<double> ts;
    ts.reserve(21);
    for (int j = 0; j <= 20; ++j)
        ts.push_back(T * (1.0 - std::pow(10.0, -1.0 - j / 10.0)));
    return ts;
}

// Offsets past the singular time at which the continuation is monitored.
const std::vector<double>& continuation_offsets() {
    static const std::vector<double> offs{1e-4, 3e-4, 1e-3, 3e-3,
                                          0.01, 0.03, 0.05, 0.1};
    return offs;
}

// File-name fragment for one eps value: "%.6g" with '.' -> 'p', '-' -> 'm'.
std::string eps_tag(double eps) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", eps);
    std::string s(buf);
    for (char& c : s) {
        if (c == '.') c = 'p';
        else if (c == '-') c = 'm';
        else if (c == '+') c = 'q';
    }
    return s;
}

const RadialProfile* find_snapshot(const FlowTrajectory& traj, double t) {
    for (const auto& p : traj.snapshots)
        if (std::abs(p.t - t) <= 1e-9 * std::max(1.0, std::abs(t))) return &p;
    return nullptr;
}

const RadialProfile& need_snapshot(const FlowTrajectory& traj, double t,
                                   const char* what) {
    const RadialProfile* p = find_snapshot(traj, t);
    if (!p)
        throw KrfError(std::string("missing scheduled snapshot (") + what +
                       ") at t = " + format_g17(t));
    return *p;
}

// sup_{rho >= window_lo} |a.phi - b.phi| on a shared grid.
double sup_phi_gap(const RadialProfile& a, const RadialProfile& b,
                   double window_lo) {
    if (a.rho_grid.size() != b.rho_grid.size())
        throw std::invalid_argument("sup_phi_gap: profiles on different grids");
    double m = 0.0;
    for (std::size_t i = 0; i < a.rho_grid.size(); ++i)
        if (a.rho_grid[i] >= window_lo)
            m = std::max(m, std::abs(a.phi[i] - b.phi[i]));
    return m;
}

EstimateCheck make_check(std::string name, std::string ref, double measured,
                         double threshold, bool pass) {
    EstimateCheck c;
    c.name = std::move(name);
    c.paper_ref = std::move(ref);
    c.measured = measured;
    c.threshold = threshold;
    c.pass = pass;
    return c;
}

// ---------------------------------------------------------------------------
// Phase computation
// ---------------------------------------------------------------------------

RunData compute_x_phase(const RunConfig& cfg) {
    validate(cfg);
    RunData d;
    d.cfg = cfg;
    d.id = run_id(cfg);
    d.T_nom = singular_time(cfg.params);
    d.t_halt = d.T_nom * (1.0 - cfg.solver.stop_threshold);

    const RadialProfile prof0 = initial_profile(
        cfg.params, cfg.grid.rho_min, cfg.grid.rho_max, cfg.grid.points);

    // Snapshot schedule: the final-decade ladder, plus the start profiles the
    // regularized family needs at T - eps.  Starts deeper than the halt are
    // collected by a follow-up run with a proportionally lower stop threshold.
    std::vector<double> extras = decade_times(d.T_nom);
    std::vector<double> ext_extras;
    if (cfg.eps_family) {
        for (double e : cfg.eps_family->eps_list) {
            const double ts = d.T_nom - e;
            if (!(ts > 0.0))
                throw std::invalid_argument(
                    "eps_list entry is not below the singular time");
            if (ts <= d.t_halt + 1e-12)
                extras.push_back(ts);
            else
                ext_extras.push_back(ts);
        }
    }

    log(LogLevel::Info, "pipeline " + d.id + ": total-space run to t = " +
                            format_g17(d.t_halt));
    d.x = run_to(prof0, cfg.solver, cfg.params, d.t_halt, extras);

    const double T_est = detect_extinction(d.x);
    d.x.events.push_back({FlowEvent::Kind::SingularTimeReached, T_est,
                          "least-squares area extrapolation"});

    if (!ext_extras.empty()) {
        const double eps_min = cfg.eps_family->eps_list.back();
        SolverConfig ext_cfg = cfg.solver;
        ext_cfg.stop_threshold = 0.2 * eps_min / d.T_nom;
        const double t_deep = d.T_nom - 0.5 * eps_min;
        log(LogLevel::Info,
            "pipeline " + d.id + ": deep run to t = " + format_g17(t_deep));
        d.xext = run_to(d.x.snapshots.back(), ext_cfg, cfg.params, t_deep,
                        ext_extras);
    }
    return d;
}

const RadialProfile& eps_start_profile(const RunData& d, double eps) {
    const double ts = d.T_nom - eps;
    const RadialProfile* p = find_snapshot(d.x, ts);
    if (!p && !d.xext.snapshots.empty()) p = find_snapshot(d.xext, ts);
    if (!p)
        throw KrfError("missing regularization start profile at t = " +
                       format_g17(ts));
    return *p;
}

// Surgery, blow-down continuation, regularized family, static solves.
void complete_run(RunData& d) {
    const RunConfig& cfg = d.cfg;

    RadialProfile y0 = surgery(d.x);
    std::vector<double> y_extras{d.T_nom};
    for (double s : continuation_offsets())
        if (y0.t + cfg.horizon >= d.T_nom + s - 1e-12)
            y_extras.push_back(d.T_nom + s);
    log(LogLevel::Info, "pipeline " + d.id + ": blow-down continuation");
    d.y = continue_on_orbifold(y0, cfg.solver, cfg.params, cfg.horizon,
                               y_extras);

    if (!cfg.eps_family) return;
    const EpsFamilyConfig& fam = *cfg.eps_family;
    for (double e : fam.eps_list) {
        const RadialProfile& start = eps_start_profile(d, e);
        EpsRun run;
        run.eps = e;
        run.tag = eps_tag(e);
        std::vector<double> ex;
        if (fam.horizon >= 0.05 - 1e-12) ex.push_back(d.T_nom + 0.05);
        log(LogLevel::Info,
            "pipeline " + d.id + ": regularized flow eps = " + format_g17(e));
        run.traj = run_eps_flow(start, e, cfg.solver, cfg.params, fam.horizon, ex);
        run.psi = solve_psi_eps(cfg.params, e, fam.K, start);
        d.eps.push_back(std::move(run));
    }
}

// ---------------------------------------------------------------------------
// Report assembly
// ---------------------------------------------------------------------------

ReportBundle build_report(const RunData& d) {
    ReportBundle bundle;
    EstimateReport& rep = bundle.report;
    rep.run_id = d.id;
    rep.params = d.cfg.params;
    auto& checks = rep.checks;

    {
        const double T_est = detect_extinction(d.x);
        checks.push_back(make_check(
            "extinction_time", "extinction time of the zero-section class",
            T_est, 0.01, std::abs(T_est - d.T_nom) <= 0.01 * d.T_nom));
    }
    for (auto& c : check_divisor_decay(d.x)) checks.push_back(std::move(c));
    for (auto& c : check_boundary_rates(d.x)) checks.push_back(std::move(c));
    checks.push_back(check_orbifold_rate(d.y));
    checks.push_back(check_trace_bound(d.x));
    checks.push_back(check_radial_exponent(d.x));

    const RadialProfile& y_at_T =
        need_snapshot(d.y, d.T_nom, "blow-down at the singular time");
    checks.push_back(check_annulus_diameter(y_at_T));

    // Distance distortion against the blow-down limit over the final decade.
    {
        const MeshOptions mesh_opts{8, 128,
                                    std::numeric_limits<double>::infinity()};
        const RadialProfile& x0 = d.x.snapshots.front();
        bundle.sample_pts = correspondence_sample(
            x0.rho_grid.front(), x0.rho_grid.back(), std::max(x0.k, 1));
        {
            auto [d0, s0] = sample_distance_matrix(x0, bundle.sample_pts, mesh_opts);
            bundle.dist0 = std::move(d0);
            bundle.dist0_slack = s0;
        }
        double diam0 = 0.0;
        for (std::size_t i = 0; i < bundle.sample_pts.size(); ++i)
            for (std::size_t j = i + 1; j < bundle.sample_pts.size(); ++j)
                diam0 = std::max(diam0, bundle.dist0[i][j]);

        const auto [dy, sy] =
            sample_distance_matrix(y_at_T, bundle.sample_pts, mesh_opts);
        for (double tj : decade_times(d.T_nom)) {
            const RadialProfile& pj = need_snapshot(d.x, tj, "decade snapshot");
            const auto [dx, sx] =
                sample_distance_matrix(pj, bundle.sample_pts, mesh_opts);
            GhPoint pt;
            pt.t = tj;
            pt.slack = sx + sy;
            for (std::size_t i = 0; i < bundle.sample_pts.size(); ++i)
                for (std::size_t j = i + 1; j < bundle.sample_pts.size(); ++j)
                    pt.distortion =
                        std::max(pt.distortion, std::abs(dx[i][j] - dy[i][j]));
            bundle.gh_series.push_back(pt);
            bundle.diam_series.push_back(
                {d.T_nom - tj, kPi * std::sqrt(2.0 * pj.phi.front())});
        }

        double worst_rise = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i + 1 < bundle.gh_series.size(); ++i)
            worst_rise = std::max(
                worst_rise, bundle.gh_series[i + 1].distortion -
                                bundle.gh_series[i].distortion -
                                bundle.gh_series[i].slack -
                                bundle.gh_series[i + 1].slack);
        checks.push_back(make_check(
            "gh_monotone",
            "measured-distance convergence to the blow-down is monotone",
            worst_rise, 0.0, worst_rise <= 0.0));

        const double gh_final = bundle.gh_series.back().distortion;
        checks.push_back(make_check(
            "gh_final_small",
            "final distance distortion is small against the initial diameter",
            diam0 > 0.0 ? gh_final / diam0 : gh_final, 0.05,
            gh_final < 0.05 * diam0));
    }

    // Continuity across the surgery: sup over the monitor window rho >= -4.
    {
        std::vector<double> offs, gaps;
        for (double s : continuation_offsets())
            if (const RadialProfile* p = find_snapshot(d.y, d.T_nom + s)) {
                offs.push_back(s);
                gaps.push_back(sup_phi_gap(*p, y_at_T, -4.0));
            }
        auto gap_at = [&](double s) -> const double* {
            for (std::size_t i = 0; i < offs.size(); ++i)
                if (std::abs(offs[i] - s) < 1e-15) return &gaps[i];
            return nullptr;
        };
        const double* g_small = gap_at(0.01);
        const double* g_large = gap_at(0.1);
        if (g_small && g_large) {
            const double ratio = *g_small / *g_large;
            checks.push_back(make_check(
                "surgery_continuity_monotone",
                "post-surgery deviation shrinks as the offset shrinks", ratio,
                1.0, ratio < 1.0));
        }
        if (!gaps.empty()) {
            checks.push_back(make_check(
                "surgery_continuity_small",
                "post-surgery deviation vanishes at the smallest offset",
                gaps.front(), 1e-3, gaps.front() < 1e-3));
        }
    }

    // Regularized family: flow gaps, static solves, volume bound.
    if (!d.eps.empty()) {
        const double t_cmp = d.T_nom + 0.05;
        const RadialProfile* y_cmp = find_snapshot(d.y, t_cmp);
        for (const auto& run : d.eps) {
            bundle.eps_vals.push_back(run.eps);
            if (y_cmp) {
                const RadialProfile& pe =
                    need_snapshot(run.traj, t_cmp, "regularized comparison");
                bundle.eps_gaps.push_back(
                    sup_phi_gap(pe, *y_cmp,
                                -std::numeric_limits<double>::infinity()));
            }
            bundle.psi_gaps.push_back(sup_phi_gap(
                run.psi, y_at_T, -std::numeric_limits<double>::infinity()));
            const int K = d.cfg.eps_family->K;
            bundle.psi_residuals.push_back(psi_ma_residual(
                d.cfg.params, run.eps, K, eps_start_profile(d, run.eps),
                run.psi));
        }

        auto worst_ratio = [](const std::vector<double>& v) {
            double w = 0.0;
            for (std::size_t i = 0; i + 1 < v.size(); ++i)
                w = std::max(w, v[i] > 0.0
                                    ? v[i + 1] / v[i]
                                    : std::numeric_limits<double>::infinity());
            return w;
        };
        if (bundle.eps_gaps.size() == d.eps.size() && d.eps.size() >= 2) {
            const double w = worst_ratio(bundle.eps_gaps);
            checks.push_back(make_check(
                "eps_gap_decreasing",
                "regularized flows approach the blow-down as eps decreases", w,
                1.0, w < 1.0));
        }
        const double res_max = *std::max_element(bundle.psi_residuals.begin(),
                                                 bundle.psi_residuals.end());
        checks.push_back(make_check(
            "psi_ma_residual_max",
            "static regularized solves satisfy their equation", res_max, 1e-8,
            res_max < 1e-8));
        if (d.eps.size() >= 2) {
            const double w = worst_ratio(bundle.psi_gaps);
            checks.push_back(make_check(
                "psi_gap_decreasing",
                "static regularizations approach the blow-down potential", w,
                1.0, w < 1.0));
        }
    }

    checks.push_back(check_restriction_bound(d.x));
    checks.push_back(check_lower_bound(d.x));

    if (!d.eps.empty()) {
        std::vector<FlowTrajectory> trajs;
        for (const auto& run : d.eps) trajs.push_back(run.traj);
        checks.push_back(
            check_eps_volume_bound_family(trajs, d.x.snapshots.front()));
    }

    {
        double m = std::numeric_limits<double>::infinity();
        auto fold = [&m](const FlowTrajectory& t) {
            for (const auto& s : t.trace) m = std::min(m, s.min_phi_prime);
        };
        fold(d.x);
        if (!d.xext.snapshots.empty()) fold(d.xext);
        fold(d.y);
        for (const auto& run : d.eps) fold(run.traj);
        checks.push_back(make_check(
            "min_phi_prime_positive",
            "the radial derivative stays positive along every accepted step",
            m, 0.0, m > 0.0));
    }

    return bundle;
}

// ---------------------------------------------------------------------------
// Artifact writing
// ---------------------------------------------------------------------------

const char* scheme_name(Scheme s) {
    return s == Scheme::Explicit ? "explicit" : "lagged_cn";
}

const char* boundary_name(BoundaryMode b) {
    return b == BoundaryMode::Robin ? "robin" : "dirichlet";
}

const char* event_name(FlowEvent::Kind k) {
    switch (k) {
        case FlowEvent::Kind::SingularTimeReached: return "singular_time_reached";
        case FlowEvent::Kind::SurgeryPerformed: return "surgery_performed";
        default: return "halted";
    }
}

FlowEvent::Kind event_kind(const std::string& s) {
    if (s == "singular_time_reached") return FlowEvent::Kind::SingularTimeReached;
    if (s == "surgery_performed") return FlowEvent::Kind::SurgeryPerformed;
    if (s == "halted") return FlowEvent::Kind::Halted;
    throw KrfError("manifest: unknown event kind '" + s + "'");
}

// Writes the snapshot CSVs plus the trace CSV of one phase and returns its
// manifest section.
ordered_json write_phase(const fs::path& dir, const std::string& stem,
                         const FlowTrajectory& traj) {
    ordered_json sec;
    sec["snapshots"] = ordered_json::array();
    int idx = 0;
    for (const auto& p : traj.snapshots) {
        char name[96];
        std::snprintf(name, sizeof name, "%s_%03d.csv", stem.c_str(), idx++);
        const std::string rel = std::string("snapshots/") + name;
        write_profile_csv((dir / rel).string(), p);
        ordered_json row;
        row["t"] = p.t;
        row["file"] = rel;
        sec["snapshots"].push_back(std::move(row));
    }
    const std::string trace_rel = "trace_" + stem + ".csv";
    write_trace_csv((dir / trace_rel).string(), traj.trace);
    sec["trace"] = trace_rel;
    sec["events"] = ordered_json::array();
    for (const auto& e : traj.events) {
        ordered_json row;
        row["kind"] = event_name(e.kind);
        row["t"] = e.t;
        row["reason"] = e.reason;
        sec["events"].push_back(std::move(row));
    }
    return sec;
}

ordered_json manifest_header(const RunData& d) {
    const RunConfig& cfg = d.cfg;
    ordered_json m;
    m["format_version"] = 1;
    m["run_id"] = d.id;
    m["params"] = {{"n", cfg.params.n},
                   {"k", cfg.params.k},
                   {"a0", cfg.params.a0},
                   {"b0", cfg.params.b0}};
    m["grid"] = {{"rho_min", cfg.grid.rho_min},
                 {"rho_max", cfg.grid.rho_max},
                 {"points", cfg.grid.points}};
    m["solver"] = {{"dt_init", cfg.solver.dt_init},
                   {"dt_safety", cfg.solver.dt_safety},
                   {"scheme", scheme_name(cfg.solver.scheme)},
                   {"stop_threshold", cfg.solver.stop_threshold},
                   {"max_steps", cfg.solver.max_steps},
                   {"snapshot_cadence", cfg.solver.snapshot_cadence},
                   {"boundary", boundary_name(cfg.solver.boundary)}};
    m["horizon"] = cfg.horizon;
    m["seed"] = cfg.seed;
    if (cfg.eps_family) {
        m["eps_family"] = {{"eps_list", cfg.eps_family->eps_list},
                           {"K", cfg.eps_family->K},
                           {"horizon", cfg.eps_family->horizon}};
    } else {
        m["eps_family"] = nullptr;
    }
    double T_est = 0.0;
    for (const auto& e : d.x.events)
        if (e.kind == FlowEvent::Kind::SingularTimeReached) T_est = e.t;
    m["anchors"] = {{"singular_time_nominal", d.T_nom},
                    {"halt_time", d.t_halt},
                    {"singular_time_estimated", T_est}};
    return m;
}

void write_json_file(const fs::path& path, const ordered_json& j) {
    write_text_file(path.string(), j.dump(2) + "\n");
}

// Stage written right after the total-space phase so an interrupted run can
// be resumed at the surgery step.
void write_x_stage(const RunData& d) {
    const fs::path dir(d.cfg.outputs.directory);
    fs::create_directories(dir / "snapshots");
    fs::create_directories(dir / "psi");
    fs::create_directories(dir / "plots");

    ordered_json m = manifest_header(d);
    m["phases"]["x"] = write_phase(dir, "x", d.x);
    m["phases"]["x_extension"] =
        d.xext.snapshots.empty() ? ordered_json(nullptr)
                                 : write_phase(dir, "xext", d.xext);
    m["phases"]["y"] = nullptr;
    m["phases"]["eps"] = ordered_json::array();
    write_json_file(dir / "manifest.json", m);
}

std::string csv_row(const std::vector<double>& vals) {
    std::string row;
    for (std::size_t i = 0; i < vals.size(); ++i) {
        if (i) row += ',';
        row += format_g17(vals[i]);
    }
    row += '\n';
    return row;
}

void write_artifacts(const RunData& d, const ReportBundle& bundle) {
    const fs::path dir(d.cfg.outputs.directory);
    fs::create_directories(dir / "snapshots");
    fs::create_directories(dir / "psi");
    fs::create_directories(dir / "plots");

    ordered_json m = manifest_header(d);
    m["phases"]["x"] = write_phase(dir, "x", d.x);
    m["phases"]["x_extension"] =
        d.xext.snapshots.empty() ? ordered_json(nullptr)
                                 : write_phase(dir, "xext", d.xext);
    m["phases"]["y"] = write_phase(dir, "y", d.y);
    m["phases"]["eps"] = ordered_json::array();
    for (const auto& run : d.eps) {
        ordered_json sec = write_phase(dir, "eps_" + run.tag, run.traj);
        sec["eps"] = run.eps;
        sec["tag"] = run.tag;
        const std::string psi_rel = "psi/psi_" + run.tag + ".csv";
        write_profile_csv((dir / psi_rel).string(), run.psi);
        sec["psi"] = psi_rel;
        m["phases"]["eps"].push_back(std::move(sec));
    }

    // Plot series.
    {
        std::string s = "t,area_d0,area_dinf\n";
        for (const auto& r : d.x.trace)
            s += csv_row({r.t, r.area_d0, r.area_dinf});
        write_text_file((dir / "plots/area_vs_t.csv").string(), s);
    }
    {
        std::string s = "t_to_singular,divisor_diameter\n";
        for (const auto& row : bundle.diam_series)
            s += csv_row({row[0], row[1]});
        write_text_file((dir / "plots/diameter_vs_t.csv").string(), s);
    }
    {
        std::string s = "t,distortion,slack\n";
        for (const auto& pt : bundle.gh_series)
            s += csv_row({pt.t, pt.distortion, pt.slack});
        write_text_file((dir / "plots/gh_vs_t.csv").string(), s);
    }
    {
        std::string s = "eps,flow_gap,psi_gap,ma_residual\n";
        for (std::size_t i = 0; i < bundle.eps_vals.size(); ++i)
            s += csv_row({bundle.eps_vals[i],
                          i < bundle.eps_gaps.size() ? bundle.eps_gaps[i]
                                                     : std::nan(""),
                          bundle.psi_gaps[i], bundle.psi_residuals[i]});
        write_text_file((dir / "plots/eps_gaps.csv").string(), s);
    }
    {
        std::string s = "check,exponent,stderr\n";
        for (const auto& c : bundle.report.checks)
            if (c.fitted_exponent)
                s += c.name + "," + format_g17(*c.fitted_exponent) + "," +
                     format_g17(c.fit_stderr ? *c.fit_stderr : 0.0) + "\n";
        write_text_file((dir / "plots/fit_summary.csv").string(), s);
    }
    {
        std::string s =
            "p_rho,p_sigma,p_beta,q_rho,q_sigma,q_beta,bound,slack\n";
        const auto& pts = bundle.sample_pts;
        for (std::size_t i = 0; i < pts.size(); ++i)
            for (std::size_t j = i + 1; j < pts.size(); ++j)
                s += csv_row({pts[i].rho, pts[i].sigma, pts[i].beta,
                              pts[j].rho, pts[j].sigma, pts[j].beta,
                              bundle.dist0[i][j], bundle.dist0_slack});
        write_text_file((dir / "distances.csv").string(), s);
    }

    write_report_json((dir / "report.json").string(), bundle.report);
    write_json_file(dir / "manifest.json", m);
}

PipelineResult finalize(RunData& d) {
    ReportBundle bundle = build_report(d);
    write_artifacts(d, bundle);
    PipelineResult result;
    result.exit_status = bundle.report.all_pass() ? 0 : 1;
    result.report = std::move(bundle.report);
    result.out_dir = d.cfg.outputs.directory;
    log(LogLevel::Info, "pipeline " + d.id + ": " +
                            (result.exit_status == 0 ? "all checks passed"
                                                     : "some checks FAILED"));
    return result;
}

// ---------------------------------------------------------------------------
// Loading a stored run
// ---------------------------------------------------------------------------

FlowTrajectory load_phase(const fs::path& dir, const ordered_json& sec,
                          Phase phase, const RunConfig& cfg) {
    FlowTrajectory traj;
    traj.params = cfg.params;
    traj.solver = cfg.solver;
    for (const auto& row : sec.at("snapshots")) {
        RadialProfile p =
            read_profile_csv((dir / row.at("file").get<std::string>()).string());
        p.phase = phase;
        p.t = row.at("t").get<double>();
        p.n = cfg.params.n;
        p.k = cfg.params.k;
        traj.snapshots.push_back(std::move(p));
    }
    traj.trace =
        read_trace_csv((dir / sec.at("trace").get<std::string>()).string());
    for (const auto& ev : sec.at("events"))
        traj.events.push_back({event_kind(ev.at("kind").get<std::string>()),
                               ev.at("t").get<double>(),
                               ev.at("reason").get<std::string>()});
    return traj;
}

RunData load_run(const std::string& run_dir) {
    const fs::path dir(run_dir);
    const ordered_json m =
        ordered_json::parse(read_text_file((dir / "manifest.json").string()));

    RunConfig cfg;
    cfg.params.n = m.at("params").at("n").get<int>();
    cfg.params.k = m.at("params").at("k").get<int>();
    cfg.params.a0 = m.at("params").at("a0").get<double>();
    cfg.params.b0 = m.at("params").at("b0").get<double>();
    cfg.grid.rho_min = m.at("grid").at("rho_min").get<double>();
    cfg.grid.rho_max = m.at("grid").at("rho_max").get<double>();
    cfg.grid.points = m.at("grid").at("points").get<std::size_t>();
    const auto& sv = m.at("solver");
    cfg.solver.dt_init = sv.at("dt_init").get<double>();
    cfg.solver.dt_safety = sv.at("dt_safety").get<double>();
    cfg.solver.scheme = sv.at("scheme").get<std::string>() == "explicit"
                            ? Scheme::Explicit
                            : Scheme::LaggedCrankNicolson;
    cfg.solver.stop_threshold = sv.at("stop_threshold").get<double>();
    cfg.solver.max_steps = sv.at("max_steps").get<std::uint64_t>();
    cfg.solver.snapshot_cadence = sv.at("snapshot_cadence").get<double>();
    cfg.solver.boundary = sv.at("boundary").get<std::string>() == "dirichlet"
                              ? BoundaryMode::Dirichlet
                              : BoundaryMode::Robin;
    cfg.outputs.snapshot_cadence = cfg.solver.snapshot_cadence;
    cfg.outputs.directory = run_dir;
    cfg.horizon = m.at("horizon").get<double>();
    cfg.seed = m.at("seed").get<long>();
    if (!m.at("eps_family").is_null()) {
        EpsFamilyConfig fam;
        fam.eps_list =
            m.at("eps_family").at("eps_list").get<std::vector<double>>();
        fam.K = m.at("eps_family").at("K").get<int>();
        fam.horizon = m.at("eps_family").at("horizon").get<double>();
        cfg.eps_family = std::move(fam);
    }

    RunData d;
    d.cfg = cfg;
    d.id = m.at("run_id").get<std::string>();
    d.T_nom = singular_time(cfg.params);
    d.t_halt = d.T_nom * (1.0 - cfg.solver.stop_threshold);

    const auto& phases = m.at("phases");
    d.x = load_phase(dir, phases.at("x"), Phase::ManifoldX, cfg);
    if (!phases.at("x_extension").is_null()) {
        d.xext = load_phase(dir, phases.at("x_extension"), Phase::ManifoldX, cfg);
        if (cfg.eps_family && !cfg.eps_family->eps_list.empty())
            d.xext.solver.stop_threshold =
                0.2 * cfg.eps_family->eps_list.back() / d.T_nom;
    }
    if (!phases.at("y").is_null())
        d.y = load_phase(dir, phases.at("y"), Phase::OrbifoldY, cfg);
    for (const auto& sec : phases.at("eps")) {
        EpsRun run;
        run.eps = sec.at("eps").get<double>();
        run.tag = sec.at("tag").get<std::string>();
        run.traj = load_phase(dir, sec, Phase::ManifoldX, cfg);
        run.psi =
            read_profile_csv((dir / sec.at("psi").get<std::string>()).string());
        run.psi.phase = Phase::OrbifoldY;
        run.psi.t = d.T_nom;
        run.psi.n = cfg.params.n;
        run.psi.k = cfg.params.k;
        d.eps.push_back(std::move(run));
    }
    return d;
}

} // namespace

// ---------------------------------------------------------------------------
// Public entry points
// ---------------------------------------------------------------------------

PipelineResult run_pipeline(const RunConfig& cfg) {
    RunData d = compute_x_phase(cfg);
    write_x_stage(d);
    complete_run(d);
    return finalize(d);
}

EstimateReport verify_run(const std::string& run_dir,
                          const std::string& report_path) {
    RunData d = load_run(run_dir);
    ReportBundle bundle = build_report(d);
    if (!report_path.empty())
        write_report_json(report_path, bundle.report);
    return bundle.report;
}

PipelineResult resume_surgery(const std::string& run_dir) {
    RunData d = load_run(run_dir);
    d.y = FlowTrajectory{};
    d.eps.clear();
    complete_run(d); // surgery() refuses when the stored run is already cut
    return finalize(d);
}

SweepIndex sweep(const std::vector<SweepEntry>& entries, unsigned jobs,
                 const std::string& index_path) {
    {
        std::set<std::string> dirs;
        for (const auto& e : entries)
            if (!dirs.insert(e.cfg.outputs.directory).second)
                throw std::invalid_argument(
                    "sweep: duplicate output directory " +
                    e.cfg.outputs.directory);
    }
    SweepIndex index;
    index.entries.resize(entries.size());
    std::atomic<std::size_t> cursor{0};

    auto worker = [&] {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= entries.size()) return;
            SweepOutcome& out = index.entries[i];
            out.label = entries[i].label;
            out.out_dir = entries[i].cfg.outputs.directory;
            try {
                out.run_id = run_id(entries[i].cfg);
                const PipelineResult r = run_pipeline(entries[i].cfg);
                out.completed = true;
                out.all_pass = r.exit_status == 0;
            } catch (const std::exception& ex) {
                out.completed = false;
                out.all_pass = false;
                out.error = ex.what();
            }
        }
    };

    const std::size_t want =
        std::min<std::size_t>(std::max(1u, jobs),
                              std::max<std::size_t>(entries.size(), 1));
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i + 1 < want; ++i) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    if (!index_path.empty()) {
        ordered_json j;
        j["entries"] = ordered_json::array();
        for (const auto& out : index.entries) {
            ordered_json row;
            row["label"] = out.label;
            row["out_dir"] = out.out_dir;
            row["run_id"] = out.run_id;
            row["completed"] = out.completed;
            row["all_pass"] = out.all_pass;
            row["error"] = out.error;
            j["entries"].push_back(std::move(row));
        }
        write_json_file(fs::path(index_path), j);
    }
    return index;
}

} // namespace krf
