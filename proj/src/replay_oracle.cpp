#include "givenet/replay_oracle.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>

namespace givenet {

OracleResult oracle_episode_check(const GiveNState& initial, std::span<const int> actions, const EnvConfig& cfg) {
  std::set<int> occupied;
  for (int i = 0; i < static_cast<int>(initial.objects.size()); ++i)
    if (initial.objects[static_cast<std::size_t>(i)] != 0) occupied.insert(i);
  const int wanted = initial.instruction;
  const int cap = cfg.give_n_max_steps > 0 ? cfg.give_n_max_steps : cfg.length;
  int taken = initial.n_selected;
  int steps = initial.t;

  OracleResult res;
  for (int a : actions) {
    if (res.terminated) break;
    double r;
    if (a == cfg.length) {
      r = (taken == wanted) ? 5 : -std::abs(wanted - taken);
      res.terminated = true;
    } else if (occupied.erase(a) == 1) {
      ++taken;
      r = 0;
    } else {
      r = -1;
    }
    ++steps;
    if (!res.terminated && steps == cap) {
      r += -std::max(1, std::abs(wanted - taken));
      res.terminated = true;
    }
    res.rewards.push_back(r);
    ++res.steps_used;
  }
  if (!res.terminated) {
    res.rewards.push_back(-std::max(1, std::abs(wanted - taken)));
    res.terminated = true;
  }
  res.correct = true;
  for (double r : res.rewards) {
    res.total_reward += r;
    if (r < 0) res.correct = false;
  }
  return res;
}

}  // namespace givenet
