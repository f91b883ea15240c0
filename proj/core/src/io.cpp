#include "krf/io.hpp"
#include "krf/errors.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

namespace krf {

LogLevel log_level() {
    const char* env = std::getenv("KRF_LOG");
    if (env == nullptr) return LogLevel::Warn;
    if (std::strcmp(env, "error") == 0) return LogLevel::Error;
    if (std::strcmp(env, "warn") == 0) return LogLevel::Warn;
    if (std::strcmp(env, "info") == 0) return LogLevel::Info;
    if (std::strcmp(env, "debug") == 0) return LogLevel::Debug;
    return LogLevel::Warn;
}

void log(LogLevel level, const std::string& msg) {
    static const LogLevel active = log_level();
    if (static_cast<int>(level) > static_cast<int>(active)) return;
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::cerr << "krf[" << names[static_cast<int>(level)] << "] " << msg << "\n";
}

std::string format_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw KrfError("cannot open for writing: " + path);
    out << content;
    if (!out)
        throw KrfError("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw KrfError("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

std::vector<std::vector<double>> read_csv_columns(const std::string& path,
                                                  const std::string& header,
                                                  std::size_t columns) {
    const std::string text = read_text_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != header)
        throw KrfError("bad CSV header in " + path);
    std::vector<std::vector<double>> cols(columns);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        for (std::size_t c = 0; c < columns; ++c) {
            if (!std::getline(row, cell, ','))
                throw KrfError("short CSV row at " + path + ":" +
                               std::to_string(lineno));
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str())
                throw KrfError("bad CSV number at " + path + ":" +
                               std::to_string(lineno));
            cols[c].push_back(v);
        }
    }
    return cols;
}

} // namespace

void write_profile_csv(const std::string& path, const RadialProfile& prof) {
    std::string out = "rho,phi\n";
    for (std::size_t i = 0; i < prof.rho_grid.size(); ++i) {
        out += format_g17(prof.rho_grid[i]);
        out += ',';
        out += format_g17(prof.phi[i]);
        out += '\n';
    }
    write_text_file(path, out);
}

RadialProfile read_profile_csv(const std::string& path) {
    const auto cols = read_csv_columns(path, "rho,phi", 2);
    RadialProfile prof;
    prof.rho_grid = cols[0];
    prof.phi = cols[1];
    if (prof.rho_grid.size() < 2)
        throw KrfError("profile CSV too short: " + path);
    return prof;
}

void write_trace_csv(const std::string& path, const std::vector<TraceSample>& trace) {
    std::string out = "t,area_d0,area_dinf,min_phi_prime\n";
    for (const auto& s : trace) {
        out += format_g17(s.t);
        out += ',';
        out += format_g17(s.area_d0);
        out += ',';
        out += format_g17(s.area_dinf);
        out += ',';
        out += format_g17(s.min_phi_prime);
        out += '\n';
    }
    write_text_file(path, out);
}

std::vector<TraceSample> read_trace_csv(const std::string& path) {
    const auto cols = read_csv_columns(path, "t,area_d0,area_dinf,min_phi_prime", 4);
    std::vector<TraceSample> trace(cols[0].size());
    for (std::size_t i = 0; i < trace.size(); ++i)
        trace[i] = {cols[0][i], cols[1][i], cols[2][i], cols[3][i]};
    return trace;
}

std::string report_to_json(const EstimateReport& report) {
    using json = nlohmann::ordered_json;
    json j;
    j["run_id"] = report.run_id;
    j["params"] = {{"n", report.params.n},
                   {"k", report.params.k},
                   {"a0", report.params.a0},
                   {"b0", report.params.b0}};
    j["all_pass"] = report.all_pass();
    j["checks"] = json::array();
    for (const auto& c : report.checks) {
        json jc;
        jc["name"] = c.name;
        jc["paper_ref"] = c.paper_ref;
        jc["measured"] = c.measured;
        if (c.fitted_exponent)
            jc["fitted_exponent"] = *c.fitted_exponent;
        else
            jc["fitted_exponent"] = nullptr;
        if (c.fit_stderr)
            jc["fit_stderr"] = *c.fit_stderr;
        else
            jc["fit_stderr"] = nullptr;
        jc["threshold"] = c.threshold;
        jc["pass"] = c.pass;
        j["checks"].push_back(jc);
    }
    return j.dump(2) + "\n";
}

void write_report_json(const std::string& path, const EstimateReport& report) {
    write_text_file(path, report_to_json(report));
}

} // namespace krf
