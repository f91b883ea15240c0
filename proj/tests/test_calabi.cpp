#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "krf/calabi.hpp"
#include "krf/errors.hpp"

#include <cmath>
#include <stdexcept>

using namespace krf;

namespace {

RadialProfile euclidean_profile(int n, std::size_t points) {
    RadialProfile prof;
    prof.rho_grid = make_uniform_grid(-4.0, 4.0, points);
    prof.phi.resize(points);
    for (std::size_t i = 0; i < points; ++i)
        prof.phi[i] = std::exp(prof.rho_grid[i]);
    prof.n = n;
    prof.k = 1;
    return prof;
}

} // namespace

TEST_CASE("singular time and class evolution") {
    CHECK(singular_time({2, 1, 1.0, 4.0}) == doctest::Approx(1.0));
    CHECK(singular_time({3, 2, 1.0, 10.0}) == doctest::Approx(1.0));
    CHECK(singular_time({3, 1, 1.0, 8.0}) == doctest::Approx(0.5));

    const FlowParams p{2, 1, 1.0, 4.0};
    const KahlerClass c0 = class_at(p, 0.0);
    CHECK(c0.a_t == doctest::Approx(1.0));
    CHECK(c0.b_t == doctest::Approx(4.0));
    const KahlerClass ch = class_at(p, 0.5);
    CHECK(ch.a_t == doctest::Approx(0.5));
    CHECK(ch.b_t == doctest::Approx(2.5));
    const KahlerClass cT = class_at(p, 1.0);
    CHECK(cT.a_t == doctest::Approx(0.0));
    CHECK(cT.b_t == doctest::Approx(1.0));

    // a_t = (n - k)(T - t) exactly on [0, T].
    const double T = singular_time(p);
    for (double t = 0.0; t <= T + 1e-12; t += 0.1) {
        const KahlerClass c = class_at(p, t);
        CHECK(c.a_t == doctest::Approx((p.n - p.k) * (T - t)).epsilon(1e-12));
        CHECK(c.t == doctest::Approx(t));
    }
}

TEST_CASE("flow parameter validation") {
    CHECK_NOTHROW(validate(FlowParams{2, 1, 1.0, 4.0}));
    CHECK_NOTHROW(validate(FlowParams{3, 2, 1.0, 10.0}));
    CHECK_THROWS_AS(validate(FlowParams{1, 1, 1.0, 4.0}), std::invalid_argument);
    CHECK_THROWS_AS(validate(FlowParams{2, 2, 1.0, 4.0}), std::invalid_argument);
    CHECK_THROWS_AS(validate(FlowParams{2, 0, 1.0, 4.0}), std::invalid_argument);
    CHECK_THROWS_AS(validate(FlowParams{2, 1, 0.0, 4.0}), std::invalid_argument);
    CHECK_THROWS_AS(validate(FlowParams{2, 1, 4.0, 4.0}), std::invalid_argument);
    // Cone condition: (n+k) a0 < (n-k) b0 fails for a0 = 3, b0 = 4.
    CHECK_THROWS_AS(validate(FlowParams{2, 1, 3.0, 4.0}), std::invalid_argument);
}

TEST_CASE("grid construction") {
    const auto g = make_uniform_grid(-2.0, 2.0, 5);
    REQUIRE(g.size() == 5);
    CHECK(g.front() == doctest::Approx(-2.0));
    CHECK(g.back() == doctest::Approx(2.0));
    CHECK(g[2] == doctest::Approx(0.0));

    RadialProfile prof;
    prof.rho_grid = g;
    prof.phi = {1.0, 2.0, 3.0, 4.0, 5.0};
    CHECK(grid_spacing(prof) == doctest::Approx(1.0));
}

TEST_CASE("initial profile carries the prescribed class and smooth closures") {
    const FlowParams p{2, 1, 1.0, 4.0};
    const RadialProfile prof = initial_profile(p, -12.0, 12.0, 2048);
    REQUIRE(prof.rho_grid.size() == 2048);
    CHECK(prof.phase == Phase::ManifoldX);
    CHECK(prof.t == doctest::Approx(0.0));
    CHECK_NOTHROW(assert_kahler(prof));

    const auto [a, b] = boundary_class(prof);
    CHECK(a == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(b == doctest::Approx(4.0).epsilon(1e-8));

    const auto [left, right] = smoothness_residual(prof);
    CHECK(left < 1e-3);
    CHECK(right < 1e-3);
}

TEST_CASE("blow-down reference profile") {
    const auto grid = make_uniform_grid(-14.0, 10.0, 1024);
    const RadialProfile y = reference_profile_y(3.0, 1, grid);
    CHECK(y.phase == Phase::OrbifoldY);
    CHECK_NOTHROW(assert_kahler(y));
    const auto [a, b] = boundary_class(y);
    CHECK(a == doctest::Approx(0.0));
    CHECK(b == doctest::Approx(3.0).epsilon(1e-6));
    const auto [left, right] = smoothness_residual(y);
    CHECK(left < 1e-3);
    CHECK(right < 1e-3);
}

TEST_CASE("metric eigenvalues of closed-form profiles") {
    // Euclidean cone: phi = e^rho gives the flat metric in every dimension.
    for (int n : {2, 3}) {
        const RadialProfile prof = euclidean_profile(n, 801);
        const AmbientHessian h = metric_eigenvalues(prof, 0.7);
        CHECK(h.lambda_sph == doctest::Approx(1.0).epsilon(1e-8));
        CHECK(h.lambda_rad == doctest::Approx(1.0).epsilon(1e-4));
        CHECK(h.det == doctest::Approx(1.0).epsilon(1e-4));
    }

    // Fubini-type profile at rho = 0: phi = 1/2, phi' = 1/4.
    const auto grid = make_uniform_grid(-8.0, 8.0, 1601);
    const RadialProfile fs = reference_profile_y(1.0, 1, grid);
    const AmbientHessian h = metric_eigenvalues(fs, 0.0);
    CHECK(h.lambda_sph == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(h.lambda_rad == doctest::Approx(0.25).epsilon(1e-4));

    // Reference (hat) profile phi = k e^{k rho} + c k matches the ambient
    // closed form at rho = 0 (r = 1).
    const int k = 2;
    const double c = 1.5;
    RadialProfile hat;
    hat.rho_grid = make_uniform_grid(-3.0, 3.0, 1201);
    hat.phi.resize(hat.rho_grid.size());
    for (std::size_t i = 0; i < hat.phi.size(); ++i)
        hat.phi[i] = k * std::exp(k * hat.rho_grid[i]) + c * k;
    hat.n = 3;
    hat.k = k;
    const AmbientHessian got = metric_eigenvalues(hat, 0.0);
    const AmbientHessian want = hat_metric_eigenvalues({3, k, c}, 1.0);
    CHECK(got.lambda_sph == doctest::Approx(want.lambda_sph).epsilon(1e-7));
    CHECK(got.lambda_rad == doctest::Approx(want.lambda_rad).epsilon(1e-4));

    // Determinant identity at a sample of interior nodes.
    const RadialProfile prof = initial_profile({3, 1, 1.0, 8.0}, -9.0, 9.0, 901);
    for (double rho : {-5.0, -1.0, 0.0, 2.0, 5.0}) {
        const AmbientHessian m = metric_eigenvalues(prof, rho);
        CHECK(m.det == doctest::Approx(std::pow(m.lambda_sph, prof.n - 1) *
                                       m.lambda_rad)
                           .epsilon(1e-10));
    }
}

TEST_CASE("positivity violations are rejected with location data") {
    RadialProfile bad;
    bad.rho_grid = make_uniform_grid(-1.0, 1.0, 5);
    bad.phi = {1.0, 2.0, 1.5, 2.5, 3.0}; // dip at node 2
    CHECK_THROWS_AS(assert_kahler(bad), NonKahlerProfile);

    RadialProfile neg;
    neg.rho_grid = make_uniform_grid(-1.0, 1.0, 5);
    neg.phi = {-0.1, 0.5, 1.0, 1.5, 2.0};
    CHECK_THROWS_AS(assert_kahler(neg), NonKahlerProfile);
}

TEST_CASE("derivative helper is second order") {
    RadialProfile prof;
    prof.rho_grid = make_uniform_grid(-2.0, 2.0, 401);
    prof.phi.resize(prof.rho_grid.size());
    for (std::size_t i = 0; i < prof.phi.size(); ++i)
        prof.phi[i] = std::exp(prof.rho_grid[i]);
    const auto d = phi_prime(prof);
    REQUIRE(d.size() == prof.phi.size());
    for (std::size_t i = 0; i < d.size(); ++i)
        CHECK(d[i] == doctest::Approx(prof.phi[i]).epsilon(5e-4));
}
