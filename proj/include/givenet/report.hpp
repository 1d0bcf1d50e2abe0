#pragma once

#include "givenet/config.hpp"
#include "givenet/evaluation.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace givenet {

struct LoadedRun {
  std::filesystem::path path;
  ExperimentConfig config;  // the run's snapshot
  RunResult result;
};

/// Reads config.json and metrics.csv of one run directory.
LoadedRun load_run(const std::filesystem::path& dir);

/// Each path is a run directory or is searched recursively for them.
/// Sorted by agent, then seed, then path.
std::vector<LoadedRun> collect_runs(const std::vector<std::filesystem::path>& paths);

/// Parses metrics.csv text.
std::vector<CheckpointRecord> parse_metrics(const std::string& csv, int episodes_per_n);

/// Writes accuracy.csv, trajectory.csv, fig2.csv, fig3.csv, fits.json,
/// summary.txt and fig2_<agent>.svg / fig3_<agent>.svg into out_dir.
/// Output depends only on the runs. Returns the summary text.
std::string write_report(const std::vector<LoadedRun>& runs, const std::filesystem::path& out_dir);

}  // namespace givenet
