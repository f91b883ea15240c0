#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "krf/errors.hpp"
#include "krf/flow.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

using namespace krf;

namespace {

RadialProfile euclidean_profile(int n, double lo, double hi, std::size_t pts) {
    RadialProfile prof;
    prof.rho_grid = make_uniform_grid(lo, hi, pts);
    prof.phi.resize(pts);
    for (std::size_t i = 0; i < pts; ++i)
        prof.phi[i] = std::exp(prof.rho_grid[i]);
    prof.n = n;
    prof.k = 1;
    return prof;
}

const FlowParams kP214{2, 1, 1.0, 4.0};

// One halted total-space run shared by the trajectory-level tests.
const FlowTrajectory& halted_run() {
    static const FlowTrajectory traj = [] {
        SolverConfig cfg;
        const RadialProfile prof = initial_profile(kP214, -12.0, 12.0, 512);
        return run_to(prof, cfg, kP214, 2.0);
    }();
    return traj;
}

const TraceSample& trace_nearest(const FlowTrajectory& traj, double t) {
    const TraceSample* best = &traj.trace.front();
    for (const auto& s : traj.trace)
        if (std::abs(s.t - t) < std::abs(best->t - t)) best = &s;
    return *best;
}

const RadialProfile& snapshot_nearest(const FlowTrajectory& traj, double t) {
    const RadialProfile* best = &traj.snapshots.front();
    for (const auto& s : traj.snapshots)
        if (std::abs(s.t - t) < std::abs(best->t - t)) best = &s;
    return *best;
}

} // namespace

TEST_CASE("regularization forcing values and limits") {
    CHECK(eps_forcing(2, 1, 1e-3, -30.0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(eps_forcing(3, 1, 0.5, 0.0) == doctest::Approx(2.0 * 0.5 / 1.5));
    CHECK(eps_forcing(3, 2, 1e-3, 0.0) ==
          doctest::Approx(1.0 * 1e-3 / (1e-3 + 1.0)));
    CHECK(eps_forcing(2, 1, 1e-6, 10.0) < 1e-9);
    CHECK(eps_forcing(2, 1, 0.0, 0.0) == 0.0);
}

TEST_CASE("the Euclidean cone is a discrete steady state away from the cap") {
    const RadialProfile prof = euclidean_profile(2, -4.0, 4.0, 401);
    const auto rhs = reduced_rhs(prof);
    REQUIRE(rhs.size() == prof.phi.size());
    // Interior and left closure (order m = k matches e^rho): stationary to
    // the truncation error of the centered stencils.
    for (std::size_t i = 0; i + 1 < rhs.size(); ++i)
        CHECK(std::abs(rhs[i]) < 1e-4);
    // The right closure assumes the capped tail phi'' / phi' = -k, which the
    // open cone does not satisfy: there the closure rate is
    // (n-1) phi'/phi - k - n = 1 - 1 - 2 = -2.
    CHECK(rhs.back() == doctest::Approx(-2.0).epsilon(1e-4));
}

TEST_CASE("reduced right-hand side on the model blow-down profile") {
    const auto grid = make_uniform_grid(-8.0, 8.0, 1601);
    const RadialProfile prof = reference_profile_y(1.0, 1, grid);
    const auto rhs = reduced_rhs(prof);
    // At rho = 0: phi = 1/2, phi' = 1/4, phi'' = 0, so the flow speed is
    // (n-1) phi'/phi + phi''/phi' - n = 1/2 - 2 = -3/2.
    CHECK(rhs[800] == doctest::Approx(-1.5).epsilon(1e-3));
    // Left closure on the blow-down phase uses order m = 1:
    // (n-1) phi'/phi -> n-1 as phi -> 0, so the rate tends to 1 - 1 = 0.
    CHECK(std::abs(rhs.front()) < 1e-3);
}

TEST_CASE("flow speed equals the log-determinant slope of the oracle") {
    // Independent cross-check: for phi = P'(rho) the reduced flow speed is
    // exactly d/drho log det(Hess P), which the finite-difference oracle can
    // measure without knowing any closed form.
    const auto potential = [](double rho) { return std::log1p(std::exp(rho)); };
    const auto grid = make_uniform_grid(-6.0, 6.0, 1201);
    const RadialProfile prof = reference_profile_y(1.0, 1, grid);
    const auto rhs = reduced_rhs(prof);
    const double h = grid_spacing(prof);

    for (double rho0 : {-1.0, 0.0, 0.8}) {
        const double delta = 1e-3;
        const auto det_at = [&](double rho) {
            const double r = std::exp(0.5 * rho);
            const AmbientHessian hs =
                hessian_oracle(potential, {{r, 0.0}, {0.0, 0.0}});
            return std::pow(hs.lambda_sph, prof.n - 1) * hs.lambda_rad;
        };
        const double slope =
            (std::log(det_at(rho0 + delta)) - std::log(det_at(rho0 - delta))) /
            (2.0 * delta);
        const std::size_t i = static_cast<std::size_t>(
            std::llround((rho0 - grid.front()) / h));
        CHECK(rhs[i] == doctest::Approx(slope).epsilon(2e-3));
    }
}

TEST_CASE("forcing enters the right-hand side additively") {
    const RadialProfile prof = initial_profile(kP214, -10.0, 10.0, 301);
    const auto base = reduced_rhs(prof, 0.0);
    const double eps = 1e-2;
    const auto forced = reduced_rhs(prof, eps);
    for (std::size_t i = 0; i < base.size(); ++i) {
        const double f = eps_forcing(prof.n, prof.k, eps, prof.rho_grid[i]);
        CHECK(std::abs(forced[i] - base[i] - f) <= 1e-13);
    }
}

TEST_CASE("zero-length step is the identity") {
    const RadialProfile prof = initial_profile(kP214, -12.0, 12.0, 256);
    SolverConfig cfg;
    StepOptions opts;
    opts.dt = 0.0;
    const RadialProfile out = step(prof, cfg, class_at(kP214, 0.0), opts);
    CHECK(out.t == prof.t);
    REQUIRE(out.phi.size() == prof.phi.size());
    for (std::size_t i = 0; i < out.phi.size(); ++i)
        CHECK(out.phi[i] == doctest::Approx(prof.phi[i]).epsilon(1e-14));
}

TEST_CASE("default step advances the clock by dt_init") {
    const RadialProfile prof = initial_profile(kP214, -12.0, 12.0, 256);
    SolverConfig cfg;
    const RadialProfile out = step(prof, cfg, class_at(kP214, 0.0));
    CHECK(out.t == doctest::Approx(prof.t + cfg.dt_init).epsilon(1e-14));
    CHECK_NOTHROW(assert_kahler(out));
}

TEST_CASE("Dirichlet mode pins the boundary nodes to the class law") {
    const RadialProfile prof = initial_profile(kP214, -12.0, 12.0, 256);
    SolverConfig cfg;
    cfg.boundary = BoundaryMode::Dirichlet;
    StepOptions opts;
    opts.dt = 1e-3;
    const KahlerClass cls = class_at(kP214, 0.0);
    const RadialProfile out = step(prof, cfg, cls, opts);
    CHECK(out.phi.front() ==
          doctest::Approx(cls.a_t + (kP214.k - kP214.n) * opts.dt)
              .epsilon(1e-12));
    CHECK(out.phi.back() ==
          doctest::Approx(cls.b_t - (kP214.k + kP214.n) * opts.dt)
              .epsilon(1e-12));
}

TEST_CASE("a steady profile barely moves in one implicit step") {
    const RadialProfile prof = euclidean_profile(2, -5.0, 5.0, 201);
    SolverConfig cfg;
    StepOptions opts;
    opts.dt = 1e-6;
    const RadialProfile out = step(prof, cfg, class_at(kP214, 0.0), opts);
    for (std::size_t i = 0; i < out.phi.size(); ++i)
        CHECK(std::abs(out.phi[i] - prof.phi[i]) <= 1e-7 * prof.phi[i]);
}

TEST_CASE("explicit and implicit schemes agree to step accuracy") {
    const RadialProfile prof = initial_profile(kP214, -5.0, 5.0, 256);
    const KahlerClass cls = class_at(kP214, 0.0);
    StepOptions opts;
    opts.dt = 1e-5;

    SolverConfig exp_cfg;
    exp_cfg.scheme = Scheme::Explicit;
    SolverConfig imp_cfg;
    imp_cfg.scheme = Scheme::LaggedCrankNicolson;

    const RadialProfile a = step(prof, exp_cfg, cls, opts);
    const RadialProfile b = step(prof, imp_cfg, cls, opts);
    REQUIRE(a.phi.size() == b.phi.size());
    double sup = 0.0;
    for (std::size_t i = 0; i < a.phi.size(); ++i)
        sup = std::max(sup, std::abs(a.phi[i] - b.phi[i]));
    CHECK(sup < 1e-8);
}

TEST_CASE("explicit scheme refuses hopeless stability limits") {
    // A long flat left tail makes 1/phi' astronomically stiff: the stable
    // explicit step collapses far below any useful size.
    const RadialProfile prof = initial_profile(kP214, -28.0, 4.0, 512);
    SolverConfig cfg;
    cfg.scheme = Scheme::Explicit;
    CHECK_THROWS_AS(step(prof, cfg, class_at(kP214, 0.0)), CFLFailure);
}

TEST_CASE("trajectory tracks the cohomology class exactly in time") {
    const FlowTrajectory& traj = halted_run();
    REQUIRE(traj.trace.size() > 100);

    const TraceSample& mid = trace_nearest(traj, 0.5);
    CHECK(mid.area_d0 == doctest::Approx(0.5).epsilon(1e-2));
    CHECK(mid.area_dinf == doctest::Approx(2.5).epsilon(1e-2));
    CHECK(mid.min_phi_prime > 0.0);

    // Strictly increasing snapshot clocks.
    for (std::size_t i = 1; i < traj.snapshots.size(); ++i)
        CHECK(traj.snapshots[i].t > traj.snapshots[i - 1].t);

    // The run halts on the area threshold, not at t_end.
    REQUIRE(!traj.events.empty());
    CHECK(traj.events.back().kind == FlowEvent::Kind::Halted);
    CHECK(traj.events.back().reason == "area threshold reached");
    CHECK(traj.events.back().t < 1.01);
}

TEST_CASE("extinction estimator recovers the class prediction") {
    const double T = detect_extinction(halted_run());
    CHECK(T == doctest::Approx(1.0).epsilon(1e-2));
}

TEST_CASE("estimator and surgery refuse an unfinished run") {
    SolverConfig cfg;
    const RadialProfile prof = initial_profile(kP214, -12.0, 12.0, 256);
    FlowTrajectory early = run_to(prof, cfg, kP214, 0.3);
    CHECK(early.events.back().reason == "t_end reached");
    CHECK_THROWS_AS(detect_extinction(early), SingularTimeNotReached);
    CHECK_THROWS_AS(surgery(early), SurgeryRefused);
}

TEST_CASE("surgery pushes the profile down to the blow-down phase") {
    FlowTrajectory traj = halted_run(); // mutable copy
    const RadialProfile before = traj.snapshots.back();
    const RadialProfile cut = surgery(traj);

    CHECK(cut.phase == Phase::OrbifoldY);
    CHECK(cut.t == doctest::Approx(before.t));
    CHECK_NOTHROW(assert_kahler(cut));

    // The excision is a constant shift: increments are untouched.
    for (std::size_t i = 1; i < cut.phi.size(); ++i)
        CHECK(cut.phi[i] - cut.phi[i - 1] ==
              doctest::Approx(before.phi[i] - before.phi[i - 1])
                  .epsilon(1e-10));

    // The blow-down profile vanishes at the origin end.  The excised
    // constant leaves the cut profile's infinity area smaller by exactly the
    // residual zero-section area.
    const auto [before_a, before_b] = boundary_class(before);
    const auto [a, b] = boundary_class(cut);
    CHECK(a == 0.0);
    CHECK(b == doctest::Approx(before_b - before_a).epsilon(1e-6));
    CHECK(cut.phi.front() < before.phi.front());
    CHECK(cut.phi.front() > 0.0);

    CHECK(traj.events.back().kind == FlowEvent::Kind::SurgeryPerformed);
    CHECK_THROWS_AS(surgery(traj), SurgeryRefused);
}

TEST_CASE("blow-down continuation and its class law") {
    FlowTrajectory traj = halted_run();
    const RadialProfile cut = surgery(traj);
    SolverConfig cfg;

    // Zero horizon: a single snapshot equal to the input.
    const FlowTrajectory still = continue_on_orbifold(cut, cfg, kP214, 0.0);
    REQUIRE(still.snapshots.size() == 1);
    CHECK(still.snapshots.front().t == cut.t);
    for (std::size_t i = 0; i < cut.phi.size(); ++i)
        CHECK(still.snapshots.front().phi[i] == cut.phi[i]);

    const double horizon = 0.1;
    const FlowTrajectory cont = continue_on_orbifold(cut, cfg, kP214, horizon);
    REQUIRE(cont.snapshots.size() >= 3);
    CHECK(cont.snapshots.back().t == doctest::Approx(cut.t + horizon));
    for (const auto& snap : cont.snapshots) CHECK(snap.phase == Phase::OrbifoldY);

    // Infinity-section area keeps shrinking at rate k + n.
    const auto [a0_, b0_] = boundary_class(cont.snapshots.front());
    const auto [a1_, b1_] = boundary_class(cont.snapshots.back());
    CHECK(a0_ == 0.0);
    CHECK(a1_ == 0.0);
    CHECK((b0_ - b1_) / horizon ==
          doctest::Approx(kP214.k + kP214.n).epsilon(2e-2));

    // Departure from the surgery-time profile grows with elapsed time.
    const auto gap_to_cut = [&](const RadialProfile& snap) {
        double sup = 0.0;
        for (std::size_t i = 0; i < snap.phi.size(); ++i)
            if (snap.rho_grid[i] >= -4.0)
                sup = std::max(sup, std::abs(snap.phi[i] - cut.phi[i]));
        return sup;
    };
    const double early = gap_to_cut(snapshot_nearest(cont, cut.t + 0.01));
    const double late = gap_to_cut(snapshot_nearest(cont, cut.t + horizon));
    CHECK(early < late);
    CHECK(early > 0.0);
}

TEST_CASE("regularized flow rebases its clock by eps") {
    const double eps = 0.1;
    const RadialProfile& at_T_minus_eps = snapshot_nearest(halted_run(), 0.9);
    REQUIRE(at_T_minus_eps.t == doctest::Approx(0.9).epsilon(1e-6));

    SolverConfig cfg;
    const FlowTrajectory traj =
        run_eps_flow(at_T_minus_eps, eps, cfg, kP214, 0.02);
    REQUIRE(!traj.snapshots.empty());
    CHECK(traj.snapshots.front().t ==
          doctest::Approx(at_T_minus_eps.t + eps).epsilon(1e-12));
    CHECK(traj.snapshots.back().t ==
          doctest::Approx(at_T_minus_eps.t + eps + 0.02).epsilon(1e-9));
    for (const auto& snap : traj.snapshots) CHECK_NOTHROW(assert_kahler(snap));

    CHECK_THROWS_AS(run_eps_flow(at_T_minus_eps, 0.0, cfg, kP214, 0.02),
                    std::invalid_argument);
}

TEST_CASE("static solve reproduces a known solution with unit normalization") {
    const int n = 2;
    const double b = 3.0;
    const auto grid = make_uniform_grid(-14.0, 10.0, 1024);
    const auto phi_y = [&](double rho) { return fubini_type_profile(b, 1, rho); };
    // Volume density of the model metric: phi phi' e^{-2 rho}.
    const auto density = [&](double rho) {
        const double u = std::exp(rho) / (1.0 + std::exp(rho));
        const double phi = b * u;
        const double dphi = b * u * (1.0 - u);
        return phi * dphi * std::exp(-n * rho);
    };
    const double left_tail = std::pow(phi_y(grid.front()), n) / n;
    const double right_tail =
        (std::pow(b, n) - std::pow(phi_y(grid.back()), n)) / n;
    const double target = std::pow(b, n) / n;

    const RadialMASolution sol =
        solve_radial_ma(n, grid, density, target, left_tail, right_tail);
    CHECK(sol.C == doctest::Approx(1.0).epsilon(1e-10));
    REQUIRE(sol.phi.size() == grid.size());
    for (std::size_t i = 0; i < grid.size(); i += 37)
        CHECK(sol.phi[i] == doctest::Approx(phi_y(grid[i])).epsilon(1e-8));

    CHECK(ma_residual_max(n, grid, density, sol.C, sol.phi) < 1e-8);
}

TEST_CASE("regularization family validation") {
    EpsFamilyConfig ok;
    ok.eps_list = {1e-2, 1e-3, 1e-4};
    CHECK_NOTHROW(validate(ok));

    EpsFamilyConfig empty;
    CHECK_THROWS_AS(validate(empty), std::invalid_argument);

    EpsFamilyConfig increasing;
    increasing.eps_list = {1e-3, 1e-2};
    CHECK_THROWS_AS(validate(increasing), std::invalid_argument);

    EpsFamilyConfig repeated;
    repeated.eps_list = {1e-2, 1e-2};
    CHECK_THROWS_AS(validate(repeated), std::invalid_argument);

    EpsFamilyConfig nonpositive;
    nonpositive.eps_list = {1e-2, 0.0};
    CHECK_THROWS_AS(validate(nonpositive), std::invalid_argument);

    EpsFamilyConfig negative_horizon;
    negative_horizon.eps_list = {1e-2};
    negative_horizon.horizon = -0.1;
    CHECK_THROWS_AS(validate(negative_horizon), std::invalid_argument);
}
