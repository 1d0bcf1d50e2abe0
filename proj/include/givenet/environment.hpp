#pragma once

#include "givenet/rng.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace givenet {

struct EnvConfig {
  int length = 40;           // L, object slots; action L is "done"
  int extra_objects = 10;    // give-N populates j ~ U{N + extra_objects .. max_objects}
  int max_objects = 35;
  int select_ones_min = 10;  // select-ones populates j ~ U{min .. max}
  int select_ones_max = 35;
  int select_ones_steps = 20;
  int give_n_max_steps = 40;  // give-N force-terminates here (0 means `length`)

  int done_action() const { return length; }
  int num_actions() const { return length + 1; }
  int give_n_cap() const { return give_n_max_steps > 0 ? give_n_max_steps : length; }
  /// Throws ConfigError on inconsistent bounds.
  void validate() const;
  /// Largest instruction the population rule can satisfy.
  int max_instruction() const { return max_objects - extra_objects; }
};

enum class Task { give_n, select_ones };

using ObjectVector = std::vector<std::uint8_t>;

int popcount(const ObjectVector& objects);
std::string to_bitstring(const ObjectVector& objects);
ObjectVector from_bitstring(const std::string& bits);

struct GiveNState {
  Task task = Task::give_n;
  ObjectVector objects;
  int instruction = 0;  // N; 0 in select-ones episodes
  int n_selected = 0;
  int t = 0;
  bool terminal = false;
};

struct StepOutcome {
  double reward = 0.0;
  GiveNState next_state;
  bool terminal = false;
};

/// j ~ U{N + extra .. max_objects} objects at distinct uniform locations.
GiveNState reset_give_n(int instruction, RngStream& rng, const EnvConfig& cfg);

/// Select 1 -> reward 0 and the bit clears; select 0 -> -1; done -> terminal
/// with +5 if exactly N were taken, else -|N - n|. Reaching the step cap
/// ends the episode and adds -max(1, |N - n|).
StepOutcome step_give_n(const GiveNState& state, int action, const EnvConfig& cfg);

GiveNState reset_select_ones(RngStream& rng, const EnvConfig& cfg);

/// 0 for a 1-bit (cleared), -1 for anything else including done; ends after
/// select_ones_steps steps.
StepOutcome step_select_ones(const GiveNState& state, int action, const EnvConfig& cfg);

StepOutcome step(const GiveNState& state, int action, const EnvConfig& cfg);

struct EpisodeTrace {
  long episode_id = 0;
  Task task = Task::give_n;
  int instruction = 0;
  ObjectVector initial_objects;
  std::vector<int> actions;
  std::vector<double> log_probs;
  std::vector<double> rewards;
  int final_selected = 0;
  bool complete = false;

  double total_reward() const;
};

/// True iff no reward in the episode was negative. Throws on an incomplete trace.
bool episode_correct(const EpisodeTrace& trace);

/// One line per episode: "<id> <N> <bits> <a,b,...> <r,r,...>".
void write_trace_line(std::ostream& os, const EpisodeTrace& trace);
EpisodeTrace parse_trace_line(const std::string& line);

}  // namespace givenet
