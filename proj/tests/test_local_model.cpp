#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "krf/local_model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

using namespace krf;

TEST_CASE("section norm is r^{2k}") {
    CHECK(section_norm(1, 1.0) == doctest::Approx(1.0));
    CHECK(section_norm(2, 0.5) == doctest::Approx(0.0625).epsilon(1e-14));
    CHECK(section_norm(3, 0.0) == doctest::Approx(0.0));
    CHECK_THROWS_AS(section_norm(1, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(section_norm(0, 1.0), std::invalid_argument);
}

TEST_CASE("reference metric eigenvalues match their closed forms") {
    {
        const AmbientHessian h = hat_metric_eigenvalues({2, 1, 1.0}, 1.0);
        CHECK(h.lambda_rad == doctest::Approx(1.0).epsilon(1e-13));
        CHECK(h.lambda_sph == doctest::Approx(2.0).epsilon(1e-13));
        CHECK(h.det == doctest::Approx(2.0).epsilon(1e-12));
    }
    {
        const AmbientHessian h = hat_metric_eigenvalues({3, 2, 1.0}, 1.0);
        CHECK(h.lambda_rad == doctest::Approx(4.0).epsilon(1e-13));
        CHECK(h.lambda_sph == doctest::Approx(4.0).epsilon(1e-13));
    }
    // k = 1: the radial eigenvalue is Euclidean for every c and r.
    for (double c : {0.2, 1.0, 5.0})
        for (double r : {0.1, 0.7, 1.9}) {
            const AmbientHessian h = hat_metric_eigenvalues({2, 1, c}, r);
            CHECK(h.lambda_rad == doctest::Approx(1.0).epsilon(1e-13));
        }
    CHECK_THROWS_AS(hat_metric_eigenvalues({2, 1, 1.0}, 0.0),
                    std::invalid_argument);
}

TEST_CASE("reference eigenvalues satisfy the sandwich bound on (0, 1]") {
    for (int n : {2, 3, 4})
        for (int k = 1; k <= n - 1; ++k)
            for (double c : {0.5, 1.0, 2.0}) {
                const double C = 2.0 * k - 1.0 + c * k;
                for (int i = 1; i <= 40; ++i) {
                    const double r = static_cast<double>(i) / 40.0;
                    const AmbientHessian h = hat_metric_eigenvalues(
                        {n, k, c}, r);
                    const double lo = k * std::pow(r, 2.0 * (k - 1));
                    const double hi = C / (r * r);
                    CHECK(h.lambda_rad >= lo * (1.0 - 1e-12));
                    CHECK(h.lambda_rad <= hi * (1.0 + 1e-12));
                    CHECK(h.lambda_sph >= lo * (1.0 - 1e-12));
                    CHECK(h.lambda_sph <= hi * (1.0 + 1e-12));
                    CHECK(h.lambda_rad > 0.0);
                    CHECK(h.lambda_sph > 0.0);
                    CHECK(h.det == doctest::Approx(
                        std::pow(h.lambda_sph, n - 1) * h.lambda_rad)
                        .epsilon(1e-12));
                }
            }
}

TEST_CASE("regularized density values and limits") {
    CHECK(gamma_eps(2, 1, 0.0, 0.3) == doctest::Approx(0.09).epsilon(1e-14));
    CHECK(gamma_eps(3, 2, 1e-4, 0.0) == doctest::Approx(0.01).epsilon(1e-14));
    CHECK(gamma_eps(2, 1, 0.0, 0.0) == doctest::Approx(0.0));
    CHECK_THROWS_AS(gamma_eps(2, 2, 0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(gamma_eps(2, 1, -1e-9, 1.0), std::invalid_argument);

    // Monotone in eps and in r; converges to the unregularized density
    // uniformly away from r = 0.
    double prev = -1.0;
    for (double eps : {0.0, 1e-6, 1e-4, 1e-2, 1.0}) {
        const double v = gamma_eps(3, 1, eps, 0.4);
        CHECK(v >= prev);
        prev = v;
    }
    prev = -1.0;
    for (double r : {0.0, 0.2, 0.5, 1.0, 2.0}) {
        const double v = gamma_eps(3, 2, 1e-3, r);
        CHECK(v >= prev);
        prev = v;
    }
    for (double r = 0.25; r <= 2.0; r += 0.25) {
        const double gap =
            std::abs(gamma_eps(3, 2, 1e-10, r) - gamma_eps(3, 2, 0.0, r));
        CHECK(gap < 1e-8);
    }
}

TEST_CASE("model blow-down profile endpoints and monotonicity") {
    CHECK(fubini_type_profile(1.0, 1, -100.0) ==
          doctest::Approx(0.0).epsilon(1e-12));
    CHECK(fubini_type_profile(1.0, 1, 0.0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(fubini_type_profile(3.0, 2, 100.0) == doctest::Approx(3.0).epsilon(1e-12));
    double prev = -1.0;
    for (double rho = -6.0; rho <= 6.0; rho += 0.25) {
        const double v = fubini_type_profile(2.0, 2, rho);
        CHECK(v > prev);
        prev = v;
    }
    CHECK_THROWS_AS(fubini_type_profile(0.0, 1, 0.0), std::invalid_argument);
}

TEST_CASE("finite-difference Hessian oracle on closed-form potentials") {
    // Euclidean potential P = e^rho: the flat metric.
    const auto euclid = [](double rho) { return std::exp(rho); };
    const AmbientHessian flat =
        hessian_oracle(euclid, {{0.7, 0.1}, {-0.3, 0.4}});
    CHECK(flat.lambda_sph == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(flat.lambda_rad == doctest::Approx(1.0).epsilon(1e-7));

    // Fubini-type potential at rho = 0 in dimension 2.
    const auto fubini = [](double rho) { return std::log1p(std::exp(rho)); };
    const AmbientHessian fs = hessian_oracle(
        fubini, {{std::sqrt(0.5), 0.0}, {0.0, std::sqrt(0.5)}});
    CHECK(fs.lambda_sph == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(fs.lambda_rad == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("oracle agrees with the closed forms at random points") {
    std::mt19937 rng(90210);
    std::uniform_real_distribution<double> radius(0.05, 2.0);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
    std::uniform_int_distribution<int> pick_n(2, 4);
    std::uniform_real_distribution<double> pick_c(0.3, 2.0);

    for (int trial = 0; trial < 100; ++trial) {
        LocalModelParams p;
        p.n = pick_n(rng);
        std::uniform_int_distribution<int> pick_k(1, p.n - 1);
        p.k = pick_k(rng);
        p.c = pick_c(rng);
        const double r = radius(rng);
        const double th = angle(rng);

        const auto potential = [&](double rho) {
            return std::exp(p.k * rho) + p.c * p.k * rho;
        };
        // Point at radius r in a random complex direction within a plane.
        std::vector<std::complex<double>> z(p.n, {0.0, 0.0});
        z[0] = r * std::cos(th) * std::exp(std::complex<double>(0.0, 0.8));
        z[1] = r * std::sin(th) * std::exp(std::complex<double>(0.0, -0.4));

        const AmbientHessian numeric = hessian_oracle(potential, z);
        const AmbientHessian closed = hat_metric_eigenvalues(p, r);
        CHECK(numeric.lambda_rad ==
              doctest::Approx(closed.lambda_rad).epsilon(1e-6));
        CHECK(numeric.lambda_sph ==
              doctest::Approx(closed.lambda_sph).epsilon(1e-6));
    }
}

TEST_CASE("parameter validation") {
    CHECK_NOTHROW(validate(LocalModelParams{2, 1, 1.0}));
    CHECK_THROWS_AS(validate(LocalModelParams{1, 1, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(validate(LocalModelParams{2, 0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(validate(LocalModelParams{2, 1, 0.0}), std::invalid_argument);
}
