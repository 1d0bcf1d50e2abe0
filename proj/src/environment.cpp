#include "givenet/environment.hpp"

#include "givenet/tensor.hpp"

#include <cmath>
#include <cstdio>
#include <algorithm>
#include <cstdlib>
#include <ostream>
#include <sstream>

namespace givenet {

void EnvConfig::validate() const {
  require(length >= 2, "env.length must be at least 2");
  require(extra_objects >= 0, "env.extra_objects must be non-negative");
  require(max_objects >= 1 && max_objects <= length,
          "env.max_objects (" + std::to_string(max_objects) + ") must lie in 1..length (" + std::to_string(length) + ")");
  require(max_objects >= 1 + extra_objects, "env.max_objects must be at least 1 + extra_objects");
  require(select_ones_min >= 0 && select_ones_min <= select_ones_max, "env.select_ones_min must not exceed select_ones_max");
  require(select_ones_max <= length, "env.select_ones_max must not exceed length");
  require(select_ones_steps >= 1, "env.select_ones_steps must be positive");
  require(give_n_cap() > max_objects,
          "env.give_n_max_steps must exceed max_objects so a timeout can never look like a correct episode");
}

int popcount(const ObjectVector& objects) {
  int n = 0;
  for (auto b : objects) n += b;
  return n;
}

std::string to_bitstring(const ObjectVector& objects) {
  std::string s;
  s.reserve(objects.size());
  for (auto b : objects) s.push_back(b ? '1' : '0');
  return s;
}

ObjectVector from_bitstring(const std::string& bits) {
  ObjectVector v;
  v.reserve(bits.size());
  for (char c : bits) {
    require(c == '0' || c == '1', "bitstring: unexpected character");
    v.push_back(c == '1' ? 1 : 0);
  }
  return v;
}

namespace {

ObjectVector populate(int length, int count, RngStream& rng) {
  ObjectVector v(static_cast<std::size_t>(length), 0);
  for (int idx : rng.sample_without_replacement(length, count)) v[static_cast<std::size_t>(idx)] = 1;
  return v;
}

void check_action(const GiveNState& state, int action, const EnvConfig& cfg) {
  require(!state.terminal, "step on a terminal state");
  require(action >= 0 && action <= cfg.done_action(),
          "action " + std::to_string(action) + " outside 0.." + std::to_string(cfg.done_action()));
  require(static_cast<int>(state.objects.size()) == cfg.length, "state does not match env length");
}

}  // namespace

GiveNState reset_give_n(int instruction, RngStream& rng, const EnvConfig& cfg) {
  require(instruction >= 1, "give-N instruction must be at least 1");
  require(instruction + cfg.extra_objects <= cfg.max_objects,
          "give-" + std::to_string(instruction) + ": N + " + std::to_string(cfg.extra_objects) + " exceeds " +
              std::to_string(cfg.max_objects) + " objects");
  GiveNState s;
  s.task = Task::give_n;
  s.instruction = instruction;
  const auto j = static_cast<int>(rng.uniform_int(instruction + cfg.extra_objects, cfg.max_objects));
  s.objects = populate(cfg.length, j, rng);
  return s;
}

StepOutcome step_give_n(const GiveNState& state, int action, const EnvConfig& cfg) {
  check_action(state, action, cfg);
  require(state.task == Task::give_n, "step_give_n on a select-ones state");
  StepOutcome out;
  out.next_state = state;
  GiveNState& next = out.next_state;
  const auto mismatch = [&] { return -std::abs(static_cast<double>(next.instruction - next.n_selected)); };
  if (action == cfg.done_action()) {
    next.terminal = true;
    out.reward = next.n_selected == next.instruction ? 5.0 : mismatch();
  } else if (next.objects[static_cast<std::size_t>(action)] == 1) {
    next.objects[static_cast<std::size_t>(action)] = 0;
    next.n_selected += 1;
    out.reward = 0.0;
  } else {
    out.reward = -1.0;
  }
  next.t += 1;
  if (!next.terminal && next.t >= cfg.give_n_cap()) {
    // Never done: at least -1 even when the count happens to be right.
    next.terminal = true;
    out.reward += std::min(-1.0, mismatch());
  }
  out.terminal = next.terminal;
  return out;
}

GiveNState reset_select_ones(RngStream& rng, const EnvConfig& cfg) {
  GiveNState s;
  s.task = Task::select_ones;
  const auto j = static_cast<int>(rng.uniform_int(cfg.select_ones_min, cfg.select_ones_max));
  s.objects = populate(cfg.length, j, rng);
  return s;
}

StepOutcome step_select_ones(const GiveNState& state, int action, const EnvConfig& cfg) {
  check_action(state, action, cfg);
  require(state.task == Task::select_ones, "step_select_ones on a give-N state");
  require(state.t < cfg.select_ones_steps, "select-ones episode already at its step limit");
  StepOutcome out;
  out.next_state = state;
  GiveNState& next = out.next_state;
  if (action != cfg.done_action() && next.objects[static_cast<std::size_t>(action)] == 1) {
    next.objects[static_cast<std::size_t>(action)] = 0;
    next.n_selected += 1;
    out.reward = 0.0;
  } else {
    out.reward = -1.0;
  }
  next.t += 1;
  next.terminal = next.t >= cfg.select_ones_steps;
  out.terminal = next.terminal;
  return out;
}

StepOutcome step(const GiveNState& state, int action, const EnvConfig& cfg) {
  return state.task == Task::give_n ? step_give_n(state, action, cfg) : step_select_ones(state, action, cfg);
}

double EpisodeTrace::total_reward() const {
  double s = 0.0;
  for (double r : rewards) s += r;
  return s;
}

bool episode_correct(const EpisodeTrace& trace) {
  if (!trace.complete) throw std::logic_error("episode_correct: trace has not reached a terminal state");
  for (double r : trace.rewards)
    if (r < 0.0) return false;
  return true;
}

void write_trace_line(std::ostream& os, const EpisodeTrace& trace) {
  os << trace.episode_id << ' ' << (trace.task == Task::give_n ? trace.instruction : 0) << ' '
     << to_bitstring(trace.initial_objects) << ' ';
  for (std::size_t i = 0; i < trace.actions.size(); ++i) os << (i ? "," : "") << trace.actions[i];
  if (trace.actions.empty()) os << '-';
  os << ' ';
  char buf[32];
  for (std::size_t i = 0; i < trace.rewards.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", trace.rewards[i]);
    os << (i ? "," : "") << buf;
  }
  if (trace.rewards.empty()) os << '-';
  os << '\n';
}

EpisodeTrace parse_trace_line(const std::string& line) {
  std::istringstream is(line);
  EpisodeTrace tr;
  std::string bits, actions, rewards;
  if (!(is >> tr.episode_id >> tr.instruction >> bits >> actions >> rewards))
    throw std::runtime_error("trace: malformed line");
  tr.task = tr.instruction == 0 ? Task::select_ones : Task::give_n;
  tr.initial_objects = from_bitstring(bits);
  auto split = [](const std::string& s, auto conv) {
    std::vector<decltype(conv(std::string{}))> out;
    if (s == "-") return out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(conv(tok));
    return out;
  };
  tr.actions = split(actions, [](const std::string& t) { return std::stoi(t); });
  tr.rewards = split(rewards, [](const std::string& t) { return std::strtod(t.c_str(), nullptr); });
  tr.complete = true;
  return tr;
}

}  // namespace givenet
