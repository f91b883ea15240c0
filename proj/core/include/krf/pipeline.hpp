#pragma once

// End-to-end orchestration: run the total-space flow to its halt, estimate
// the extinction time, perform the surgery, continue on the blow-down, run
// the regularized family, solve the static regularizations, assemble the
// quantitative report, and persist every artifact.  Also the inverse
// direction: rebuild a report from stored artifacts, resume a stored run at
// the surgery step, and run many configurations as a sweep.

#include "krf/config.hpp"
#include "krf/estimates.hpp"

#include <string>
#include <vector>

namespace krf {

struct PipelineResult {
    int exit_status = 1; // 0 iff every check passed
    EstimateReport report;
    std::string out_dir;
};

// The full run.  Creates cfg.outputs.directory (plus snapshots/, psi/ and
// plots/ below it) and writes snapshots, traces, the static solves, the
// distance table, the plot series, report.json and manifest.json.
PipelineResult run_pipeline(const RunConfig& cfg);

// Rebuilds the trajectories from a stored run directory and recomputes the
// report from scratch.  The result is byte-identical to the stored
// report.json for an unmodified run directory.  report_path, when
// nonempty, receives the recomputed report.
EstimateReport verify_run(const std::string& run_dir,
                          const std::string& report_path = "");

// Redo the surgery step and everything after it on a stored run.  Refuses
// (SurgeryRefused) when the stored trajectory has already been cut.
PipelineResult resume_surgery(const std::string& run_dir);

struct SweepEntry {
    std::string label;
    RunConfig cfg;
};

struct SweepOutcome {
    std::string label;
    std::string out_dir;
    std::string run_id;
    bool completed = false; // false: the run threw; error holds the message
    bool all_pass = false;
    std::string error;
};

struct SweepIndex {
    std::vector<SweepOutcome> entries;
};

// Runs every entry (jobs > 1: worker threads over a shared queue), each in
// isolation: one failing configuration is recorded and does not stop the
// others.  Entries must target distinct output directories.  index_path,
// when nonempty, receives a JSON index of the outcomes.
SweepIndex sweep(const std::vector<SweepEntry>& entries, unsigned jobs,
                 const std::string& index_path = "");

} // namespace krf
