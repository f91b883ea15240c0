#include "krf/config.hpp"
#include "krf/errors.hpp"
#include "krf/io.hpp"

#include <cctype>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>

namespace krf {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

double parse_number(const std::string& value, int line, const std::string& key) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &used);
    } catch (const std::exception&) {
        throw ConfigInvalid(line, "value of '" + key + "' is not a number");
    }
    if (used != value.size())
        throw ConfigInvalid(line, "trailing characters in value of '" + key + "'");
    return v;
}

long parse_integer(const std::string& value, int line, const std::string& key) {
    std::size_t used = 0;
    long v = 0;
    try {
        v = std::stol(value, &used);
    } catch (const std::exception&) {
        throw ConfigInvalid(line, "value of '" + key + "' is not an integer");
    }
    if (used != value.size())
        throw ConfigInvalid(line, "trailing characters in value of '" + key + "'");
    return v;
}

std::vector<double> parse_number_list(const std::string& value, int line,
                                      const std::string& key) {
    std::vector<double> out;
    std::istringstream in(value);
    std::string cell;
    while (std::getline(in, cell, ','))
        out.push_back(parse_number(trim(cell), line, key));
    if (out.empty())
        throw ConfigInvalid(line, "empty list for '" + key + "'");
    return out;
}

} // namespace

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::map<std::string, int> seen; // key -> line, for invariant attribution
    std::optional<std::vector<double>> eps_list;
    int eps_K = 0;
    double eps_horizon = EpsFamilyConfig{}.horizon;

    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::size_t hash = raw.find('#');
        if (hash != std::string::npos) raw = raw.substr(0, hash);
        const std::string entry = trim(raw);
        if (entry.empty()) continue;
        const std::size_t eq = entry.find('=');
        if (eq == std::string::npos)
            throw ConfigInvalid(line, "expected 'key = value'");
        const std::string key = trim(entry.substr(0, eq));
        const std::string value = trim(entry.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigInvalid(line, "expected 'key = value'");
        if (seen.count(key))
            throw ConfigInvalid(line, "duplicate key '" + key + "'");
        seen[key] = line;

        if (key == "n")
            cfg.params.n = static_cast<int>(parse_integer(value, line, key));
        else if (key == "k")
            cfg.params.k = static_cast<int>(parse_integer(value, line, key));
        else if (key == "a0")
            cfg.params.a0 = parse_number(value, line, key);
        else if (key == "b0")
            cfg.params.b0 = parse_number(value, line, key);
        else if (key == "dt_init")
            cfg.solver.dt_init = parse_number(value, line, key);
        else if (key == "dt_safety")
            cfg.solver.dt_safety = parse_number(value, line, key);
        else if (key == "scheme") {
            if (value == "explicit")
                cfg.solver.scheme = Scheme::Explicit;
            else if (value == "lagged_cn")
                cfg.solver.scheme = Scheme::LaggedCrankNicolson;
            else
                throw ConfigInvalid(line, "scheme must be 'explicit' or 'lagged_cn'");
        } else if (key == "stop_threshold")
            cfg.solver.stop_threshold = parse_number(value, line, key);
        else if (key == "max_steps")
            cfg.solver.max_steps =
                static_cast<std::uint64_t>(parse_integer(value, line, key));
        else if (key == "snapshot_cadence") {
            cfg.solver.snapshot_cadence = parse_number(value, line, key);
            cfg.outputs.snapshot_cadence = cfg.solver.snapshot_cadence;
        } else if (key == "out_dir")
            cfg.outputs.directory = value;
        else if (key == "rho_min")
            cfg.grid.rho_min = parse_number(value, line, key);
        else if (key == "rho_max")
            cfg.grid.rho_max = parse_number(value, line, key);
        else if (key == "points")
            cfg.grid.points = static_cast<std::size_t>(parse_integer(value, line, key));
        else if (key == "horizon")
            cfg.horizon = parse_number(value, line, key);
        else if (key == "eps_list")
            eps_list = parse_number_list(value, line, key);
        else if (key == "eps_K")
            eps_K = static_cast<int>(parse_integer(value, line, key));
        else if (key == "seed")
            cfg.seed = parse_integer(value, line, key);
        else
            throw ConfigInvalid(line, "unknown key '" + key + "'");
    }

    auto line_of = [&](const char* key) {
        const auto it = seen.find(key);
        return it == seen.end() ? 0 : it->second;
    };
    for (const char* key : {"n", "k", "a0", "b0"})
        if (!seen.count(key))
            throw ConfigInvalid(0, std::string("missing required key '") + key + "'");

    // Parameter invariants, attributed to the lines that set them.
    const auto& p = cfg.params;
    if (p.n < 2)
        throw ConfigInvalid(line_of("n"), "n must be >= 2");
    if (p.k < 1 || p.k > p.n - 1)
        throw ConfigInvalid(line_of("k"), "k must satisfy 1 <= k <= n-1");
    if (!(p.a0 > 0.0))
        throw ConfigInvalid(line_of("a0"), "a0 must be > 0");
    if (!(p.b0 > p.a0))
        throw ConfigInvalid(line_of("b0"), "b0 must exceed a0");
    if (!((p.n + p.k) * p.a0 < (p.n - p.k) * p.b0))
        throw ConfigInvalid(line_of("b0"),
                            "class condition violated: need (n+k) a0 < (n-k) b0");
    if (!(cfg.grid.rho_min < cfg.grid.rho_max))
        throw ConfigInvalid(line_of("rho_max"), "grid bounds must be ordered");
    if (cfg.grid.points < 128)
        throw ConfigInvalid(line_of("points"), "points must be >= 128");
    if (!(cfg.solver.snapshot_cadence > 0.0))
        throw ConfigInvalid(line_of("snapshot_cadence"), "cadence must be > 0");
    if (!(cfg.solver.dt_init > 0.0))
        throw ConfigInvalid(line_of("dt_init"), "dt_init must be > 0");
    if (!(cfg.solver.dt_safety > 0.0) || cfg.solver.dt_safety > 1.0)
        throw ConfigInvalid(line_of("dt_safety"), "dt_safety must lie in (0, 1]");
    if (!(cfg.solver.stop_threshold > 0.0) || cfg.solver.stop_threshold >= 1.0)
        throw ConfigInvalid(line_of("stop_threshold"),
                            "stop_threshold must lie in (0, 1)");
    if (!(cfg.horizon >= 0.0))
        throw ConfigInvalid(line_of("horizon"), "horizon must be >= 0");

    if (eps_list) {
        EpsFamilyConfig fam;
        fam.eps_list = *eps_list;
        fam.K = eps_K;
        fam.horizon = eps_horizon;
        try {
            validate(fam);
        } catch (const std::invalid_argument& e) {
            throw ConfigInvalid(line_of("eps_list"), e.what());
        }
        cfg.eps_family = std::move(fam);
    } else if (seen.count("eps_K")) {
        throw ConfigInvalid(line_of("eps_K"), "eps_K requires eps_list");
    }

    validate(cfg);
    return cfg;
}

void validate(const RunConfig& cfg) {
    validate(cfg.params);
    if (!(cfg.grid.rho_min < cfg.grid.rho_max))
        throw std::invalid_argument("grid bounds must be ordered");
    if (cfg.grid.points < 128)
        throw std::invalid_argument("grid must have at least 128 points");
    if (!(cfg.outputs.snapshot_cadence > 0.0))
        throw std::invalid_argument("snapshot cadence must be > 0");
    if (cfg.eps_family) validate(*cfg.eps_family);
}

std::string run_id(const RunConfig& cfg) {
    // Content fingerprint (FNV-1a) over the canonical parameter rendering.
    std::string blob;
    blob += std::to_string(cfg.params.n) + "|" + std::to_string(cfg.params.k) + "|";
    blob += format_g17(cfg.params.a0) + "|" + format_g17(cfg.params.b0) + "|";
    blob += format_g17(cfg.solver.dt_init) + "|" + format_g17(cfg.solver.dt_safety) + "|";
    blob += std::to_string(static_cast<int>(cfg.solver.scheme)) + "|";
    blob += format_g17(cfg.solver.stop_threshold) + "|";
    blob += std::to_string(cfg.solver.max_steps) + "|";
    blob += format_g17(cfg.solver.snapshot_cadence) + "|";
    blob += format_g17(cfg.grid.rho_min) + "|" + format_g17(cfg.grid.rho_max) + "|";
    blob += std::to_string(cfg.grid.points) + "|";
    blob += format_g17(cfg.horizon) + "|";
    if (cfg.eps_family) {
        for (double e : cfg.eps_family->eps_list) blob += format_g17(e) + ",";
        blob += "|" + std::to_string(cfg.eps_family->K) + "|";
        blob += format_g17(cfg.eps_family->horizon) + "|";
    }
    blob += std::to_string(cfg.seed);

    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : blob) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return "krf-n" + std::to_string(cfg.params.n) + "k" + std::to_string(cfg.params.k) +
           "-" + std::string(hex, 8);
}

} // namespace krf
