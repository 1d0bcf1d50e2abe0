#include "givenet/training.hpp"

#include "givenet/sampling.hpp"

#include <cmath>
#include <sstream>

namespace givenet {

void TrainConfig::validate() const {
  require(total_episodes > 0, "train.total_episodes must be positive");
  require(step1_episodes >= 0 && step1_episodes < total_episodes, "train.step1_episodes must be below total_episodes");
  require(lr >= 0.0, "train.lr must be non-negative");
  require(checkpoint_interval > 0, "train.checkpoint_interval must be positive");
  require(threshold > 0.0 && threshold <= 1.0, "train.threshold must lie in (0, 1]");
  require(n_max_cap >= 1, "train.n_max_cap must be at least 1");
  require(entropy_bonus >= 0.0 && grad_clip >= 0.0, "train.entropy_bonus and grad_clip must be non-negative");
}

CountSequences::CountSequences(const Counter& counter, int max_instruction, int steps)
    : steps_(steps), dim_(counter.embedding_dim()) {
  require(max_instruction >= 1 && max_instruction <= counter.length(),
          "instructions up to " + std::to_string(max_instruction) + " exceed the counter length " +
              std::to_string(counter.length()));
  for (int n = 1; n <= max_instruction; ++n) seq_.push_back(counter.rollout(n, steps));
}

const Vec& CountSequences::at(int instruction, int t) const {
  require(instruction >= 1 && instruction <= static_cast<int>(seq_.size()), "CountSequences: instruction out of range");
  require(t >= 0 && t <= steps_, "CountSequences: step out of range");
  return seq_[static_cast<std::size_t>(instruction - 1)][static_cast<std::size_t>(t)];
}

EpisodeRun run_episode(Agent& agent, const CountSequences& counts, const EnvConfig& env, Task task, int instruction,
                       RngStream& env_rng, RngStream* sampler, bool record_gradients) {
  EpisodeRun run;
  run.tape = std::make_unique<Tape>(record_gradients);
  Tape& tape = *run.tape;
  GiveNState state = task == Task::give_n ? reset_give_n(instruction, env_rng, env) : reset_select_ones(env_rng, env);
  run.trace.task = task;
  run.trace.instruction = task == Task::give_n ? instruction : 0;
  run.trace.initial_objects = state.objects;
  agent.reset(tape);
  const Vec zero = Vec::Zero(counts.embedding_dim());
  const bool object_only = task == Task::select_ones;
  Vec obs(env.length);
  while (!state.terminal) {
    for (int i = 0; i < env.length; ++i) obs(i) = state.objects[static_cast<std::size_t>(i)];
    const Vec& z = object_only ? zero : counts.at(instruction, std::min(state.t, counts.steps()));
    AgentOutput out = agent.step(tape, z, obs, object_only);
    const int action = sampler != nullptr ? categorical_sample(out.action_probs, *sampler) : argmax(out.action_probs);
    const Var chosen = tape.pick(out.log_probs, action);
    StepOutcome outcome = step(state, action, env);
    run.trace.actions.push_back(action);
    run.trace.log_probs.push_back(tape.scalar(chosen));
    run.trace.rewards.push_back(outcome.reward);
    run.chosen_log_probs.push_back(chosen);
    run.step_log_probs.push_back(out.log_probs);
    state = std::move(outcome.next_state);
  }
  run.trace.final_selected = state.n_selected;
  run.trace.complete = true;
  return run;
}

std::vector<double> returns(std::span<const double> rewards) {
  std::vector<double> g(rewards.size());
  double acc = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc += rewards[i];
    g[i] = acc;
  }
  return g;
}

UpdateInfo reinforce_update(EpisodeRun& run, std::span<Parameter* const> params, double lr, const TrainConfig& cfg) {
  require(run.trace.complete, "reinforce_update: incomplete episode");
  UpdateInfo info;
  const std::vector<double> g = returns(run.trace.rewards);
  Tape& tape = *run.tape;
  std::vector<std::pair<Var, double>> seeds;
  for (std::size_t t = 0; t < g.size(); ++t) {
    info.loss -= run.trace.log_probs[t] * g[t];
    if (g[t] != 0.0) seeds.emplace_back(run.chosen_log_probs[t], -g[t]);
  }
  if (cfg.entropy_bonus > 0.0) {
    // d(-beta * H)/d log p_a = beta * p_a * (log p_a + H) per step.
    for (Var lp : run.step_log_probs) {
      const Vec& logp = tape.value(lp);
      const Vec p = logp.array().exp();
      const double h = -p.dot(logp);
      info.loss -= cfg.entropy_bonus * h;
      for (Eigen::Index a = 0; a < logp.size(); ++a) {
        const double w = cfg.entropy_bonus * p(a) * (logp(a) + h);
        if (w != 0.0) seeds.emplace_back(tape.pick(lp, a), w);
      }
    }
  }
  if (!std::isfinite(info.loss)) {
    info.skipped_non_finite = true;
    return info;
  }
  zero_grads(params);
  if (seeds.empty()) return info;
  tape.backward(seeds);
  if (grads_all_zero(params)) return info;
  if (cfg.grad_clip > 0.0) {
    info.grad_norm = clip_grad_norm(params, cfg.grad_clip);
  }
  try {
    adam_update(params, lr);
  } catch (const NumericError&) {
    zero_grads(params);
    info.skipped_non_finite = true;
    return info;
  }
  info.applied = true;
  return info;
}

std::string to_string(Phase p) { return p == Phase::select_ones ? "step1" : "giveN"; }

CurriculumState curriculum_tick(const CurriculumState& state, const CheckpointRecord& record, double threshold,
                                int cap) {
  CurriculumState next = state;
  if (state.phase != Phase::give_n) return next;
  if (state.n_max < cap && state.n_max <= record.max_instruction() && record.at(state.n_max) >= threshold)
    next.n_max += 1;
  return next;
}

CheckpointRecord evaluate_checkpoint(Agent& agent, const CountSequences& counts, const EnvConfig& env,
                                     const EvalConfig& cfg, int max_instruction, RngStream rng, long episode) {
  require(cfg.test_episodes > 0, "eval.test_episodes must be positive");
  CheckpointRecord rec;
  rec.episode = episode;
  rec.episodes_per_n = cfg.test_episodes;
  for (int n = 1; n <= max_instruction; ++n) {
    int ok = 0;
    for (int k = 0; k < cfg.test_episodes; ++k) {
      EpisodeRun run = run_episode(agent, counts, env, Task::give_n, n, rng, nullptr, false);
      ok += episode_correct(run.trace) ? 1 : 0;
    }
    rec.correct.push_back(ok);
    rec.accuracy.push_back(static_cast<double>(ok) / static_cast<double>(cfg.test_episodes));
  }
  return rec;
}

// --- Trainer ---

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kTrainStream = 2;
constexpr std::uint64_t kEvalStream = 3;

int counts_horizon(const EnvConfig& env) { return std::max(env.give_n_cap(), env.select_ones_steps); }

}  // namespace

Trainer::Trainer(const RunSettings& settings, AgentKind kind, const Counter& counter, std::uint64_t seed)
    : settings_(settings),
      counter_(&counter),
      counts_(counter, settings.eval.extrap_max, counts_horizon(settings.env)),
      seed_(seed),
      rng_(RngStream(seed).derive(kTrainStream)) {
  if (!counter.frozen()) throw ConfigError("training requires a frozen pre-trained counter");
  settings_.train.validate();
  settings_.env.validate();
  require(settings_.agent.object_dim == settings_.env.length, "agent.object_dim must equal env.length");
  require(settings_.agent.num_actions == settings_.env.num_actions(), "agent.num_actions must equal env.length + 1");
  require(settings_.agent.embedding_dim == counter.embedding_dim(), "agent.embedding_dim must match the counter");
  RngStream init = RngStream(seed).derive(kInitStream);
  agent_ = make_agent(kind, settings_.agent, init);
  params_ = agent_->parameters();
}

UpdateInfo Trainer::train_one() {
  const TrainConfig& tc = settings_.train;
  Task task = curriculum_.phase == Phase::select_ones ? Task::select_ones : Task::give_n;
  int n = 0;
  if (task == Task::give_n) {
    n = static_cast<int>(rng_.uniform_int(1, curriculum_.n_max));
    if (keep_drawn_) drawn_.push_back(n);
  }
  EpisodeRun run = run_episode(*agent_, counts_, settings_.env, task, n, rng_, &rng_, true);
  UpdateInfo info = reinforce_update(run, params_, tc.lr, tc);
  if (info.skipped_non_finite) ++skipped_updates_;
  curriculum_.episode_count += 1;
  if (curriculum_.phase == Phase::select_ones && curriculum_.episode_count >= tc.step1_episodes) {
    curriculum_.phase = Phase::give_n;
    events_.push_back({curriculum_.episode_count, "phase giveN N_max=1"});
  }
  return info;
}

void Trainer::checkpoint(const CheckpointHook& hook) {
  const long ep = curriculum_.episode_count;
  CheckpointRecord rec = evaluate_checkpoint(*agent_, counts_, settings_.env, settings_.eval, settings_.eval.extrap_max,
                                             RngStream(seed_).derive(kEvalStream).derive(static_cast<std::uint64_t>(ep)),
                                             ep);
  CurriculumState during = curriculum_;
  if (ep <= settings_.train.step1_episodes) during.phase = Phase::select_ones;
  const CurriculumState next = curriculum_tick(curriculum_, rec, settings_.train.threshold, settings_.train.n_max_cap);
  records_.push_back(rec);
  if (next.n_max != curriculum_.n_max) {
    std::ostringstream os;
    os << "N_max " << curriculum_.n_max << " -> " << next.n_max;
    events_.push_back({ep, os.str()});
  }
  curriculum_ = next;
  if (hook) hook(*this, rec, during);
}

void Trainer::run(long episode_target, const CheckpointHook& hook) {
  const long target = episode_target < 0 ? settings_.train.total_episodes
                                         : std::min(episode_target, settings_.train.total_episodes);
  while (curriculum_.episode_count < target) {
    train_one();
    if (curriculum_.episode_count % settings_.train.checkpoint_interval == 0) checkpoint(hook);
  }
}

Checkpoint Trainer::save_state() const {
  Checkpoint ck = const_cast<Agent&>(*agent_).to_checkpoint(true);
  ck.header["seed"] = std::to_string(seed_);
  ck.header["episode"] = std::to_string(curriculum_.episode_count);
  ck.header["phase"] = to_string(curriculum_.phase);
  ck.header["n_max"] = std::to_string(curriculum_.n_max);
  ck.header["rng"] = rng_.serialize();
  ck.header["skipped_updates"] = std::to_string(skipped_updates_);
  std::ostringstream events;
  for (const auto& e : events_) events << e.episode << ':' << e.what << ';';
  ck.header["events"] = events.str();
  std::ostringstream recs;
  for (const auto& r : records_) {
    recs << r.episode << ':' << r.episodes_per_n;
    for (int c : r.correct) recs << ',' << c;
    recs << ';';
  }
  ck.header["records"] = recs.str();
  return ck;
}

void Trainer::load_state(const Checkpoint& ck) {
  auto get = [&](const std::string& k) {
    auto it = ck.header.find(k);
    if (it == ck.header.end()) throw ConfigError("trainer state: missing header " + k);
    return it->second;
  };
  if (std::stoull(get("seed")) != seed_) throw ConfigError("trainer state belongs to a different seed");
  agent_->load_checkpoint(ck, true);
  curriculum_.episode_count = std::stol(get("episode"));
  curriculum_.phase = get("phase") == "step1" ? Phase::select_ones : Phase::give_n;
  curriculum_.n_max = std::stoi(get("n_max"));
  rng_ = RngStream::deserialize(get("rng"));
  skipped_updates_ = std::stol(get("skipped_updates"));
  events_.clear();
  {
    std::istringstream is(get("events"));
    std::string item;
    while (std::getline(is, item, ';')) {
      if (item.empty()) continue;
      const auto colon = item.find(':');
      events_.push_back({std::stol(item.substr(0, colon)), item.substr(colon + 1)});
    }
  }
  records_.clear();
  {
    std::istringstream is(get("records"));
    std::string item;
    while (std::getline(is, item, ';')) {
      if (item.empty()) continue;
      CheckpointRecord r;
      const auto colon = item.find(':');
      r.episode = std::stol(item.substr(0, colon));
      std::istringstream fields(item.substr(colon + 1));
      std::string f;
      std::getline(fields, f, ',');
      r.episodes_per_n = std::stoi(f);
      while (std::getline(fields, f, ',')) {
        const int c = std::stoi(f);
        r.correct.push_back(c);
        r.accuracy.push_back(static_cast<double>(c) / static_cast<double>(r.episodes_per_n));
      }
      records_.push_back(std::move(r));
    }
  }
}

}  // namespace givenet
