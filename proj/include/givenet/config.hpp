#pragma once

#include "givenet/agents.hpp"
#include "givenet/counter.hpp"
#include "givenet/training.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace givenet {

/// Everything a batch experiment needs. Agent input/output widths are not
/// configured directly: they follow from the environment and the counter.
struct ExperimentConfig {
  AgentKind agent = AgentKind::esbn;
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "runs";
  int workers = 1;
  std::uint64_t counter_seed = 0;
  CounterConfig counter;
  RunSettings run;

  /// Throws ConfigError naming the first violated constraint.
  void validate() const;
  /// Settings handed to the trainer, with derived widths filled in.
  RunSettings run_settings() const;
};

/// Defaults are the full-scale constants; `scaled_config` is the desk-scale
/// variant (L = 20, counter length 9, training N 1..6, extrapolation 7..9).
ExperimentConfig default_config();
ExperimentConfig scaled_config();

/// JSON text. Unknown keys and wrong types are rejected; missing keys keep
/// their defaults.
ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& cfg);

/// Reads and validates. Throws ConfigError (message names the path) when the
/// file is missing or invalid.
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace givenet
