#pragma once

// Artifact persistence: CSV profiles and traces with bit-stable decimal
// floats, report JSON, plain text helpers, and the stderr logger.

#include "krf/estimates.hpp"
#include "krf/flow.hpp"

#include <string>
#include <vector>

namespace krf {

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

// Level taken from the KRF_LOG environment variable
// (error|warn|info|debug); defaults to warn.
LogLevel log_level();
void log(LogLevel level, const std::string& msg);

// 17-significant-digit decimal rendering: parses back to the same double.
std::string format_g17(double v);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// Profile CSV: header "rho,phi", one row per node.  Metadata (phase, time,
// parameters) lives in the run manifest; read_profile_csv leaves those at
// defaults for the caller to stamp.
void write_profile_csv(const std::string& path, const RadialProfile& prof);
RadialProfile read_profile_csv(const std::string& path);

// Trace CSV: header "t,area_d0,area_dinf,min_phi_prime".
void write_trace_csv(const std::string& path, const std::vector<TraceSample>& trace);
std::vector<TraceSample> read_trace_csv(const std::string& path);

// Report JSON: {run_id, params, checks:[{name, paper_ref, measured,
// fitted_exponent, fit_stderr, threshold, pass}]}.
std::string report_to_json(const EstimateReport& report);
void write_report_json(const std::string& path, const EstimateReport& report);

} // namespace krf
