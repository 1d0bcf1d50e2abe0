#pragma once

#include "givenet/config.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>

namespace givenet {

namespace fs = std::filesystem;

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const fs::path& path);

/// Writes dir/manifest.json: every other file under dir with its size and
/// SHA-256, plus the given status fields.
void write_manifest(const fs::path& dir, const std::string& kind, bool complete, const std::string& extra_json = "{}");
/// `complete` field of dir/manifest.json, false when absent.
bool manifest_complete(const fs::path& dir);

fs::path counter_dir(const ExperimentConfig& cfg);
fs::path counter_checkpoint_path(const ExperimentConfig& cfg);
fs::path run_dir(const ExperimentConfig& cfg, std::uint64_t seed);

/// Config snapshot of one seed's run: the experiment config narrowed to that seed.
ExperimentConfig run_snapshot(const ExperimentConfig& cfg, std::uint64_t seed);

using LogFn = std::function<void(const std::string&)>;

struct PretrainOutcome {
  bool success = false;
  PretrainReport report;
  fs::path directory;
};

/// Pre-trains the counter into counter_dir(cfg): config.json, report.txt and,
/// on success, the frozen counter.ckpt.
PretrainOutcome pretrain_to_directory(const ExperimentConfig& cfg, const LogFn& log = {});

/// Loads and checks the frozen counter a training config expects.
Counter load_counter_for(const ExperimentConfig& cfg);

struct TrainOutcome {
  fs::path directory;
  long episode = 0;
  bool complete = false;
  bool already_complete = false;
  bool resumed = false;
};

/// Trains one seed into run_dir(cfg, seed), resuming from state.ckpt when
/// present. `stop_at` ends the invocation early (the run stays resumable).
/// Files: config.json, metrics.csv, curriculum.log, state.ckpt, best.ckpt,
/// final.ckpt, manifest.json, and checkpoints/ when keep_checkpoints is set.
TrainOutcome train_to_directory(const ExperimentConfig& cfg, std::uint64_t seed, const Counter& counter,
                                std::optional<long> stop_at = std::nullopt, bool keep_checkpoints = false,
                                const LogFn& log = {});

/// Header and one row of metrics.csv.
std::string metrics_header(int max_instruction);
std::string metrics_row(const CheckpointRecord& r, Phase phase, int n_max);

}  // namespace givenet
