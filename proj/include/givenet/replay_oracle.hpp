#pragma once

#include "givenet/environment.hpp"

#include <span>
#include <vector>

namespace givenet {

struct OracleResult {
  double total_reward = 0.0;
  bool correct = false;
  std::vector<double> rewards;
  bool terminated = false;
  /// Index of the action on which the episode ended (or actions.size()).
  std::size_t steps_used = 0;
};

/// Replays a give-N action list from scratch with a deliberately plain
/// re-statement of the reward rules, independent of step_give_n. If the
/// list runs out before the episode ends, the episode is closed with the
/// timeout penalty -max(1, |N - n|).
OracleResult oracle_episode_check(const GiveNState& initial, std::span<const int> actions, const EnvConfig& cfg);

}  // namespace givenet
