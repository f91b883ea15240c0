#pragma once

// Measured pass/fail checks for the quantitative behavior of the flow:
// trace bounds, exponent fits, the divisor area and diameter laws, the
// boundary rate laws, restriction and lower metric bounds, and the
// regularized-family volume bound.

#include "krf/flow.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace krf {

struct EstimateCheck {
    std::string name;
    std::string paper_ref; // short description of the claim being measured
    double measured = 0.0;
    std::optional<double> fitted_exponent;
    std::optional<double> fit_stderr;
    double threshold = 0.0;
    bool pass = false;
};

struct EstimateReport {
    std::string run_id;
    FlowParams params;
    std::vector<EstimateCheck> checks;

    bool all_pass() const;
    const EstimateCheck* find(const std::string& name) const;
};

// Ordinary least squares slope of log y against log x, with its standard
// error.  Rejects nonpositive data and samples of fewer than 4 points.
std::pair<double, double> fit_exponent(const std::vector<double>& xs,
                                       const std::vector<double>& ys);

// sup over rho <= 0 of max(phi, phi') stays within a factor 10 of its
// initial value along the run.
EstimateCheck check_trace_bound(const FlowTrajectory& traj);

// Decay order of phi' near the divisor at the final snapshot: the log-log
// slope against e^rho must be at least delta = k/(k+1) (minus tolerance),
// and the radial length L(r) must admit a finite constant in L <= C r^delta.
EstimateCheck check_radial_exponent(const FlowTrajectory& traj);

// Two checks: (a) the zero-section area decays linearly in T - t with slope
// n - k within 0.5%; (b) the divisor diameter pi sqrt(2 phi(rho_min))
// collapses at least as fast as C (T-t)^{1/3} over the last measured decade.
std::vector<EstimateCheck> check_divisor_decay(const FlowTrajectory& traj);

// Dyadic annulus ladder r_j = 2^{-j}, j = 2..7 (the annulus |z| in [r, 4r]
// stays inside the unit ball): the measured annulus diameters stay below
// C r^{delta/3} with C calibrated at the largest radius.
EstimateCheck check_annulus_diameter(const RadialProfile& prof_T);

// The divisor restriction phi(rho_min, t) / phi(rho_min, 0) never exceeds
// 1 + tolerance and is monotone nonincreasing within solver noise.
EstimateCheck check_restriction_bound(const FlowTrajectory& traj);

// Uniform metric lower bound against the model blow-down reference:
// c(t) = inf_rho min(phi/phi_ref, phi'/phi_ref') stays above 0.01 c(0).
EstimateCheck check_lower_bound(const FlowTrajectory& traj);

// Volume lower bound of one regularized flow against the initial metric:
// det G_eps >= (1/C) e^{(n-k) rho} det G_0 with the calibrated C returned
// as the measured constant.
EstimateCheck check_eps_volume_bound(const FlowTrajectory& eps_traj,
                                     const RadialProfile& base_prof);

// Family form: one C must serve every eps (calibrated constants within a
// factor 2 across the family).
EstimateCheck check_eps_volume_bound_family(const std::vector<FlowTrajectory>& eps_trajs,
                                            const RadialProfile& base_prof);

// Boundary rate laws read off the trace: d(area_D0)/dt = k - n and
// d(area_Dinf)/dt = -(k + n), both within 1% over the middle of the run.
std::vector<EstimateCheck> check_boundary_rates(const FlowTrajectory& traj);

// Same law for the infinity section along the blow-down continuation,
// within 2%.
EstimateCheck check_orbifold_rate(const FlowTrajectory& y_traj);

} // namespace krf
