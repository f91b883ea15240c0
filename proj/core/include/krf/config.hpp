#pragma once

// Flat key = value run configuration, its validation, and the deterministic
// run identifier.

#include "krf/flow.hpp"

#include <optional>
#include <string>

namespace krf {

struct GridSpec {
    double rho_min = -12.0;
    double rho_max = 12.0;
    std::size_t points = 2048;
};

struct OutputSpec {
    double snapshot_cadence = 0.01;
    std::string directory = "out";
};

struct RunConfig {
    FlowParams params;
    SolverConfig solver;
    GridSpec grid;
    OutputSpec outputs;
    std::optional<EpsFamilyConfig> eps_family;
    long seed = 12345;
    double horizon = 0.12; // blow-down continuation length past the halt
};

// Parses one `key = value` per line with `#` comments.  Keys: n, k, a0, b0,
// dt_init, dt_safety, scheme (explicit | lagged_cn), stop_threshold,
// max_steps, snapshot_cadence, out_dir, rho_min, rho_max, points, horizon,
// eps_list (comma-separated), eps_K, seed.  n, k, a0, b0 are required.
// Throws ConfigInvalid carrying the offending line number (0 when no line
// applies, e.g. a missing required key).
RunConfig parse_config(const std::string& text);

// Full invariant check (also called by parse_config).  Throws
// std::invalid_argument naming the violated invariant.
void validate(const RunConfig& cfg);

// Deterministic identifier derived from the configuration content only —
// no clocks, no hosts — so identical configs collide on purpose.
std::string run_id(const RunConfig& cfg);

} // namespace krf
