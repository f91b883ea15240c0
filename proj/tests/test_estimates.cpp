#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "krf/errors.hpp"
#include "krf/estimates.hpp"

#include <cmath>
#include <random>

using namespace krf;

namespace {

const FlowParams kP214{2, 1, 1.0, 4.0};

struct Lab {
    FlowTrajectory x_run;
    RadialProfile cut;
    FlowTrajectory y_run;
    FlowTrajectory eps_run;
};

// One full experiment (run to the singular time, cut, continue, one
// regularized companion), shared by every check in this suite.
const Lab& lab() {
    static const Lab fixture = [] {
        Lab l;
        SolverConfig cfg;
        const RadialProfile prof = initial_profile(kP214, -12.0, 12.0, 512);
        l.x_run = run_to(prof, cfg, kP214, 2.0);
        FlowTrajectory for_surgery = l.x_run;
        l.cut = surgery(for_surgery);
        l.y_run = continue_on_orbifold(l.cut, cfg, kP214, 0.12);

        const double eps = 1e-2;
        const RadialProfile* start = &l.x_run.snapshots.front();
        const double t_want = singular_time(kP214) - eps;
        for (const auto& s : l.x_run.snapshots)
            if (std::abs(s.t - t_want) < std::abs(start->t - t_want))
                start = &s;
        l.eps_run = run_eps_flow(*start, eps, cfg, kP214, 0.12);
        return l;
    }();
    return fixture;
}

} // namespace

TEST_CASE("log-log exponent fitting") {
    {
        std::vector<double> xs, ys;
        for (int i = 1; i <= 16; ++i) {
            xs.push_back(0.1 * i);
            ys.push_back(0.01 * i * i);
        }
        const auto [slope, err] = fit_exponent(xs, ys);
        CHECK(slope == doctest::Approx(2.0).epsilon(1e-10));
        CHECK(err < 1e-10);
    }
    {
        std::mt19937 rng(7);
        std::uniform_real_distribution<double> noise(-0.01, 0.01);
        std::vector<double> xs, ys;
        for (int i = 1; i <= 64; ++i) {
            const double x = 0.05 * i;
            xs.push_back(x);
            ys.push_back(3.0 * std::sqrt(x) * (1.0 + noise(rng)));
        }
        const auto [slope, err] = fit_exponent(xs, ys);
        CHECK(slope == doctest::Approx(0.5).epsilon(0.04));
        CHECK(err < 0.01);
    }
    {
        const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
        const std::vector<double> ys{5.0, 5.0, 5.0, 5.0};
        const auto [slope, err] = fit_exponent(xs, ys);
        CHECK(slope == doctest::Approx(0.0));
        CHECK(err == doctest::Approx(0.0));
    }
    CHECK_THROWS_AS(fit_exponent({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}),
                    FitDegeneracy);
    CHECK_THROWS_AS(fit_exponent({1.0, 2.0, 3.0, 4.0}, {1.0, -2.0, 3.0, 4.0}),
                    FitDegeneracy);
    CHECK_THROWS_AS(fit_exponent({1.0, 2.0}, {1.0, 2.0, 3.0}), FitDegeneracy);
}

TEST_CASE("trace bound along the run") {
    const EstimateCheck c = check_trace_bound(lab().x_run);
    CHECK(c.name == "trace_bound");
    CHECK(c.pass);
    CHECK(c.measured > 0.0);
    CHECK(c.measured <= c.threshold);
}

TEST_CASE("zero-section area law and divisor collapse") {
    const auto checks = check_divisor_decay(lab().x_run);
    REQUIRE(checks.size() == 2);

    const EstimateCheck& slope = checks[0];
    CHECK(slope.name == "area_law_slope");
    CHECK(slope.pass);
    CHECK(slope.measured ==
          doctest::Approx(static_cast<double>(kP214.n - kP214.k))
              .epsilon(5e-3));

    const EstimateCheck& diam = checks[1];
    CHECK(diam.name == "divisor_diameter_bound");
    CHECK(diam.pass);
    REQUIRE(diam.fitted_exponent.has_value());
    CHECK(*diam.fitted_exponent >= 1.0 / 3.0 - 0.02);
}

TEST_CASE("boundary rate laws on the total space") {
    const auto checks = check_boundary_rates(lab().x_run);
    REQUIRE(checks.size() == 2);
    CHECK(checks[0].name == "boundary_rate_zero_section");
    CHECK(checks[0].pass);
    CHECK(checks[0].measured ==
          doctest::Approx(static_cast<double>(kP214.k - kP214.n))
              .epsilon(1e-2));
    CHECK(checks[1].name == "boundary_rate_infinity_section");
    CHECK(checks[1].pass);
    CHECK(checks[1].measured ==
          doctest::Approx(-static_cast<double>(kP214.k + kP214.n))
              .epsilon(1e-2));
}

TEST_CASE("blow-down continuation rate law") {
    const EstimateCheck c = check_orbifold_rate(lab().y_run);
    CHECK(c.name == "orbifold_rate_infinity_section");
    CHECK(c.pass);
    CHECK(c.measured ==
          doctest::Approx(-static_cast<double>(kP214.k + kP214.n))
              .epsilon(2e-2));
}

TEST_CASE("restriction stays bounded by its initial value") {
    const EstimateCheck c = check_restriction_bound(lab().x_run);
    CHECK(c.name == "restriction_bound");
    CHECK(c.pass);
    CHECK(c.measured <= 1.0 + 1e-2);
}

TEST_CASE("uniform lower bound against the model metric") {
    const EstimateCheck c = check_lower_bound(lab().x_run);
    CHECK(c.name == "lower_bound");
    CHECK(c.pass);
    CHECK(c.measured > 0.0);
}

TEST_CASE("decay order of the metric near the divisor") {
    const EstimateCheck c = check_radial_exponent(lab().x_run);
    CHECK(c.name == "radial_exponent");
    CHECK(c.pass);
    REQUIRE(c.fitted_exponent.has_value());
    const double delta =
        static_cast<double>(kP214.k) / (kP214.k + 1.0);
    CHECK(*c.fitted_exponent >= delta - 0.05);
}

TEST_CASE("dyadic annulus diameters at the singular time") {
    const EstimateCheck c =
        check_annulus_diameter(lab().x_run.snapshots.back());
    CHECK(c.name == "annulus_diameter");
    CHECK(c.pass);
}

TEST_CASE("volume bound of the regularized flow") {
    const EstimateCheck single =
        check_eps_volume_bound(lab().eps_run, lab().x_run.snapshots.front());
    CHECK(single.pass);
    CHECK(std::isfinite(single.measured));
    CHECK(single.measured > 0.0);

    const EstimateCheck family = check_eps_volume_bound_family(
        {lab().eps_run}, lab().x_run.snapshots.front());
    CHECK(family.name == "eps_volume_bound_uniform");
    CHECK(family.pass); // a single member is trivially uniform
}

TEST_CASE("report bookkeeping") {
    EstimateReport report;
    report.run_id = "unit";
    report.params = kP214;
    report.checks.push_back(check_trace_bound(lab().x_run));
    report.checks.push_back(check_restriction_bound(lab().x_run));

    CHECK(report.all_pass());
    REQUIRE(report.find("trace_bound") != nullptr);
    CHECK(report.find("trace_bound")->name == "trace_bound");
    CHECK(report.find("no_such_check") == nullptr);

    report.checks.front().pass = false;
    CHECK(!report.all_pass());
}
