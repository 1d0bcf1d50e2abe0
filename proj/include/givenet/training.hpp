#pragma once

#include "givenet/agents.hpp"
#include "givenet/counter.hpp"
#include "givenet/environment.hpp"
#include "givenet/evaluation.hpp"

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace givenet {

struct TrainConfig {
  long total_episodes = 500000;
  long step1_episodes = 50000;
  double lr = 5e-5;
  long checkpoint_interval = 1000;
  double threshold = 0.66;
  int n_max_cap = 10;
  // Extensions, off by default.
  double entropy_bonus = 0.0;
  double grad_clip = 0.0;

  void validate() const;
};

/// Embeddings the frozen counter feeds the agent: z_0 = e(x_N), then the
/// recited sequence from e(x_1). Precomputed per instruction.
class CountSequences {
 public:
  CountSequences(const Counter& counter, int max_instruction, int steps);
  const Vec& at(int instruction, int t) const;
  int steps() const { return steps_; }
  int embedding_dim() const { return dim_; }

 private:
  int steps_;
  int dim_;
  std::vector<std::vector<Vec>> seq_;
};

struct EpisodeRun {
  EpisodeTrace trace;
  std::unique_ptr<Tape> tape;
  std::vector<Var> chosen_log_probs;
  std::vector<Var> step_log_probs;
};

/// Drives one episode. `sampler` draws actions categorically; a null sampler
/// takes the most probable action. Select-ones episodes feed zero embeddings
/// and set the agent's object-only flag.
EpisodeRun run_episode(Agent& agent, const CountSequences& counts, const EnvConfig& env, Task task, int instruction,
                       RngStream& env_rng, RngStream* sampler, bool record_gradients);

/// Greedy test of every instruction 1..max_instruction with `cfg.test_episodes`
/// fresh object vectors each. `rng` is consumed only here, so evaluation never
/// disturbs training randomness.
CheckpointRecord evaluate_checkpoint(Agent& agent, const CountSequences& counts, const EnvConfig& env,
                                     const EvalConfig& cfg, int max_instruction, RngStream rng, long episode);

/// Undiscounted reward-to-go.
std::vector<double> returns(std::span<const double> rewards);

struct UpdateInfo {
  double loss = 0.0;
  bool applied = false;
  bool skipped_non_finite = false;
  double grad_norm = 0.0;
};

/// loss = -sum_t log pi(a_t) G_t (minus entropy_bonus * entropy when set);
/// one Adam step. Skips the optimizer entirely when every gradient is zero
/// and when the loss is not finite.
UpdateInfo reinforce_update(EpisodeRun& run, std::span<Parameter* const> params, double lr,
                            const TrainConfig& cfg = {});

enum class Phase { select_ones, give_n };
std::string to_string(Phase p);

struct CurriculumState {
  Phase phase = Phase::select_ones;
  int n_max = 1;
  long episode_count = 0;
};

/// Raises N_max by one when the checkpoint accuracy on N_max reaches the
/// threshold, up to the cap. Never lowers it.
CurriculumState curriculum_tick(const CurriculumState& state, const CheckpointRecord& record, double threshold,
                                int cap);

struct CurriculumEvent {
  long episode = 0;
  std::string what;
};

/// Complete experiment settings for one training run.
struct RunSettings {
  TrainConfig train;
  EnvConfig env;
  AgentConfig agent;
  EvalConfig eval;
};

/// One seeded training run with resumable state.
class Trainer {
 public:
  Trainer(const RunSettings& settings, AgentKind kind, const Counter& counter, std::uint64_t seed);

  /// Called after each checkpoint's curriculum tick. `during` is the phase
  /// and N_max the evaluated episodes were trained under.
  using CheckpointHook = std::function<void(const Trainer&, const CheckpointRecord&, const CurriculumState& during)>;

  /// Trains until `episode_target` (or total_episodes) episodes have run.
  /// Evaluates every checkpoint_interval episodes and calls the hook.
  void run(long episode_target = -1, const CheckpointHook& hook = {});
  /// Runs exactly one training episode and update.
  UpdateInfo train_one();

  long episode() const { return curriculum_.episode_count; }
  const CurriculumState& curriculum() const { return curriculum_; }
  const std::vector<CheckpointRecord>& records() const { return records_; }
  const std::vector<CurriculumEvent>& events() const { return events_; }
  const RunSettings& settings() const { return settings_; }
  Agent& agent() { return *agent_; }
  const Agent& agent() const { return *agent_; }
  const CountSequences& counts() const { return counts_; }
  std::uint64_t seed() const { return seed_; }
  long skipped_updates() const { return skipped_updates_; }
  /// Instructions drawn for give-N training episodes, in order.
  const std::vector<int>& drawn_instructions() const { return drawn_; }
  void keep_drawn_instructions(bool keep) { keep_drawn_ = keep; }

  /// Full state (parameters, Adam moments, RNG, curriculum, records).
  Checkpoint save_state() const;
  void load_state(const Checkpoint& ckpt);

 private:
  void checkpoint(const CheckpointHook& hook);

  RunSettings settings_;
  const Counter* counter_;
  CountSequences counts_;
  std::uint64_t seed_;
  std::unique_ptr<Agent> agent_;
  ParamList params_;
  RngStream rng_;
  CurriculumState curriculum_;
  std::vector<CheckpointRecord> records_;
  std::vector<CurriculumEvent> events_;
  long skipped_updates_ = 0;
  bool keep_drawn_ = false;
  std::vector<int> drawn_;
};

}  // namespace givenet
