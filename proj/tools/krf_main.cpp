// Command line front end: run one configuration end to end, recompute a
// stored run's report, redo the surgery step, or sweep many configurations.
// Exit codes: 0 all checks passed, 1 some check failed, 2 operational error
// (bad config, refused surgery, solver failure) with a JSON error record on
// stderr.

#include "krf/errors.hpp"
#include "krf/io.hpp"
#include "krf/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <glob.h>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

namespace {

std::vector<std::string> expand_glob(const std::string& pattern) {
    glob_t g{};
    const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
    std::vector<std::string> out;
    if (rc == 0)
        for (std::size_t i = 0; i < g.gl_pathc; ++i)
            out.emplace_back(g.gl_pathv[i]);
    ::globfree(&g);
    if (rc != 0 && rc != GLOB_NOMATCH)
        throw krf::KrfError("glob failed on pattern " + pattern);
    return out;
}

int fail(const std::string& type, const std::string& message) {
    nlohmann::ordered_json j;
    j["error"] = {{"type", type}, {"message", message}};
    std::fprintf(stderr, "%s\n", j.dump(2).c_str());
    return 2;
}

void print_checks(const krf::EstimateReport& report) {
    for (const auto& c : report.checks)
        std::printf("[%s] %-32s measured = %s\n", c.pass ? " ok " : "FAIL",
                    c.name.c_str(), krf::format_g17(c.measured).c_str());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for the reduced Kahler-Ricci flow "
                 "with surgery"};
    app.require_subcommand(1);

    std::string config_path, out_dir, run_dir, report_path, glob_pattern,
        index_path;
    unsigned jobs = 1;

    CLI::App* cmd_run =
        app.add_subcommand("run", "run one configuration end to end");
    cmd_run->add_option("--config", config_path, "configuration file")
        ->required();
    cmd_run->add_option("--out", out_dir, "output directory override");

    CLI::App* cmd_verify = app.add_subcommand(
        "verify", "recompute the report from a stored run directory");
    cmd_verify->add_option("--run", run_dir, "run directory")->required();
    cmd_verify->add_option("--report", report_path,
                           "where to write the recomputed report");

    CLI::App* cmd_surgery = app.add_subcommand(
        "surgery", "redo the surgery step and everything after it");
    cmd_surgery->add_option("--run", run_dir, "run directory")->required();

    CLI::App* cmd_sweep =
        app.add_subcommand("sweep", "run every configuration matching a glob");
    cmd_sweep->add_option("--configs", glob_pattern, "config file glob")
        ->required();
    cmd_sweep->add_option("--jobs", jobs, "worker threads");
    cmd_sweep->add_option("--index", index_path,
                          "where to write the outcome index "
                          "(default sweep_index.json)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_run->parsed()) {
            krf::RunConfig cfg =
                krf::parse_config(krf::read_text_file(config_path));
            if (!out_dir.empty()) cfg.outputs.directory = out_dir;
            const krf::PipelineResult res = krf::run_pipeline(cfg);
            print_checks(res.report);
            std::printf("%s: %s\n", res.out_dir.c_str(),
                        res.exit_status == 0 ? "all checks passed"
                                             : "CHECKS FAILED");
            return res.exit_status;
        }
        if (cmd_verify->parsed()) {
            const krf::EstimateReport report =
                krf::verify_run(run_dir, report_path);
            print_checks(report);
            return report.all_pass() ? 0 : 1;
        }
        if (cmd_surgery->parsed()) {
            const krf::PipelineResult res = krf::resume_surgery(run_dir);
            print_checks(res.report);
            return res.exit_status;
        }
        if (cmd_sweep->parsed()) {
            const std::vector<std::string> files = expand_glob(glob_pattern);
            if (files.empty())
                return fail("config_invalid",
                            "no configuration files match " + glob_pattern);
            std::vector<krf::SweepEntry> entries;
            for (const std::string& f : files) {
                krf::SweepEntry e;
                e.label = std::filesystem::path(f).stem().string();
                e.cfg = krf::parse_config(krf::read_text_file(f));
                entries.push_back(std::move(e));
            }
            const std::string idx =
                index_path.empty() ? std::string("sweep_index.json")
                                   : index_path;
            const krf::SweepIndex index = krf::sweep(entries, jobs, idx);
            bool all_ok = true;
            for (const auto& out : index.entries) {
                std::string line = out.completed
                                       ? std::string(out.all_pass ? "[ ok ] "
                                                                  : "[FAIL] ")
                                       : std::string("[ERR ] ");
                line += out.label + " -> " + out.out_dir;
                if (!out.error.empty()) line += " (" + out.error + ")";
                std::printf("%s\n", line.c_str());
                all_ok = all_ok && out.completed && out.all_pass;
            }
            return all_ok ? 0 : 1;
        }
    } catch (const krf::ConfigInvalid& e) {
        return fail("config_invalid", e.what());
    } catch (const krf::SurgeryRefused& e) {
        return fail("surgery_refused", e.what());
    } catch (const krf::KrfError& e) {
        return fail("solver_error", e.what());
    } catch (const std::exception& e) {
        return fail("error", e.what());
    }
    return 2;
}
