#include "doctest.h"

#include "support.hpp"

#include "givenet/grad_check.hpp"

#include <cmath>

using namespace givenet;
using givenet::testing::quick_counter;
using givenet::testing::tiny_settings;

namespace {

const Counter& small_counter() {
  static const Counter c = quick_counter(6, 8, 77);
  return c;
}

// Deterministic policy: takes the first remaining object until it holds N, then done.
class ScriptedAgent final : public Agent {
 public:
  ScriptedAgent(const AgentConfig& cfg, int target) : Agent(cfg), target_(target) {}
  AgentKind kind() const override { return AgentKind::lstm; }
  void reset(Tape&) override {
    t_ = 0;
    taken_ = 0;
  }
  AgentOutput step(Tape& tape, const Vec& z, const Vec& o, bool object_only) override {
    seen_z.push_back(z);
    seen_object_only.push_back(object_only);
    Vec logits = Vec::Zero(cfg_.num_actions);
    int a = cfg_.num_actions - 1;
    if (taken_ < target_)
      for (int i = 0; i < o.size(); ++i)
        if (o(i) == 1.0) {
          a = i;
          break;
        }
    if (a != cfg_.num_actions - 1) ++taken_;
    logits(a) = 60.0;
    return finish(tape, tape.constant(logits));
  }
  ParamList parameters() override { return {}; }

  std::vector<Vec> seen_z;
  std::vector<bool> seen_object_only;

 private:
  int target_;
  int taken_ = 0;
};

}  // namespace

TEST_CASE("returns are suffix sums") {
  CHECK(returns(std::vector<double>{0, 0, 5}) == std::vector<double>{5, 5, 5});
  CHECK(returns(std::vector<double>{-1, 0, 5}) == std::vector<double>{4, 5, 5});
  CHECK(returns(std::vector<double>{}).empty());
}

TEST_CASE("run_episode") {
  const Counter& c = small_counter();
  RunSettings s = tiny_settings(6, 8);
  const CountSequences counts(c, 6, 12);
  SUBCASE("scripted give-1 earns +5") {
    ScriptedAgent agent(s.agent, 1);
    RngStream env(1);
    const EpisodeRun run = run_episode(agent, counts, s.env, Task::give_n, 1, env, nullptr, false);
    CHECK(run.trace.complete);
    CHECK(run.trace.total_reward() == 5.0);
    CHECK(run.trace.rewards == std::vector<double>{0, 5});
    CHECK(episode_correct(run.trace));
    CHECK(run.trace.actions.size() == run.trace.log_probs.size());
    CHECK(agent.seen_z[0] == counts.at(1, 0));
    CHECK(agent.seen_z[1] == counts.at(1, 1));
  }
  SUBCASE("select-ones feeds only the object vector") {
    ScriptedAgent agent(s.agent, 100);
    RngStream env(2);
    const EpisodeRun run = run_episode(agent, counts, s.env, Task::select_ones, 0, env, nullptr, false);
    CHECK(run.trace.actions.size() == 5);
    for (std::size_t t = 0; t < agent.seen_z.size(); ++t) {
      CHECK(agent.seen_z[t].isZero());
      CHECK(agent.seen_object_only[t]);
    }
  }
  SUBCASE("greedy episodes repeat exactly") {
    RngStream init(3);
    auto agent = make_agent(AgentKind::esbn, s.agent, init);
    RngStream e1(4), e2(4);
    const EpisodeRun a = run_episode(*agent, counts, s.env, Task::give_n, 3, e1, nullptr, false);
    const EpisodeRun b = run_episode(*agent, counts, s.env, Task::give_n, 3, e2, nullptr, false);
    CHECK(a.trace.actions == b.trace.actions);
    CHECK(a.trace.rewards == b.trace.rewards);
    CHECK(a.trace.log_probs == b.trace.log_probs);
  }
}

TEST_CASE("evaluate_checkpoint with scripted and random policies") {
  const Counter& c = small_counter();
  RunSettings s = tiny_settings(6, 8);
  const CountSequences counts(c, 6, 12);
  EvalConfig ec;
  ec.test_episodes = 30;
  // A scripted agent with a fixed target is perfect on that target only.
  ScriptedAgent agent(s.agent, 3);
  const CheckpointRecord r = evaluate_checkpoint(agent, counts, s.env, ec, 6, RngStream(5), 1000);
  CHECK(r.at(3) == 1.0);
  CHECK(r.at(2) == 0.0);
  CHECK(r.correct[2] == 30);
  CHECK(r.episodes_per_n == 30);
  CHECK(r.episode == 1000);

  // Near-uniform random weights almost never produce a flawless N >= 2 episode.
  RngStream init(6);
  AgentConfig ac = s.agent;
  auto random = make_agent(AgentKind::lstm, ac, init);
  for (Parameter* p : random->parameters()) p->value *= 1e-3;
  const CheckpointRecord rr = evaluate_checkpoint(*random, counts, s.env, ec, 6, RngStream(7), 0);
  for (int n = 2; n <= 6; ++n) CHECK(rr.at(n) <= 0.1);
}

TEST_CASE("reinforce_update") {
  const Counter& c = small_counter();
  RunSettings s = tiny_settings(6, 8);
  const CountSequences counts(c, 6, 12);
  RngStream init(8);
  auto agent = make_agent(AgentKind::lstm, s.agent, init);
  const ParamList params = agent->parameters();
  std::vector<Mat> before;
  for (Parameter* p : params) before.push_back(p->value);

  SUBCASE("zero return leaves parameters bit-identical") {
    RngStream env(9);
    EpisodeRun run = run_episode(*agent, counts, s.env, Task::give_n, 2, env, &env, true);
    std::fill(run.trace.rewards.begin(), run.trace.rewards.end(), 0.0);
    const UpdateInfo info = reinforce_update(run, params, 0.1);
    CHECK_FALSE(info.applied);
    CHECK(info.loss == 0.0);
    for (std::size_t i = 0; i < params.size(); ++i) {
      CHECK(params[i]->value == before[i]);
      CHECK(params[i]->step_count == 0);
    }
  }
  SUBCASE("non-finite loss is skipped") {
    RngStream env(10);
    EpisodeRun run = run_episode(*agent, counts, s.env, Task::give_n, 2, env, &env, true);
    run.trace.log_probs[0] = -INFINITY;
    const UpdateInfo info = reinforce_update(run, params, 0.1);
    CHECK(info.skipped_non_finite);
    for (std::size_t i = 0; i < params.size(); ++i) CHECK(params[i]->value == before[i]);
  }
  SUBCASE("the first Adam step moves against the finite-difference gradient") {
    RngStream env(11);
    EpisodeRun run = run_episode(*agent, counts, s.env, Task::give_n, 2, env, &env, true);
    while (run.trace.actions.size() < 2) run = run_episode(*agent, counts, s.env, Task::give_n, 2, env, &env, true);
    const std::vector<int> actions = run.trace.actions;
    const std::vector<double> g = returns(run.trace.rewards);
    const GiveNState start{Task::give_n, run.trace.initial_objects, 2, 0, 0, false};
    // Surrogate loss replayed on the same observations.
    auto surrogate = [&](Tape& tape) {
      agent->reset(tape);
      GiveNState st = start;
      Var loss = tape.constant(Vec::Zero(1));
      for (std::size_t t = 0; t < actions.size(); ++t) {
        Vec o(static_cast<Eigen::Index>(st.objects.size()));
        for (std::size_t i = 0; i < st.objects.size(); ++i) o(static_cast<Eigen::Index>(i)) = st.objects[i];
        const AgentOutput out = agent->step(tape, counts.at(2, static_cast<int>(t)), o, false);
        loss = tape.add(loss, tape.scale(tape.pick(out.log_probs, actions[t]), -g[t]));
        st = step_give_n(st, actions[t], s.env).next_state;
      }
      return loss;
    };
    // Analytic gradient of the surrogate, checked against finite differences first.
    const auto gc = grad_check(surrogate, params, env);
    CHECK(gc.max_relative_error < 1e-4);
    Tape tape;
    zero_grads(params);
    tape.backward(surrogate(tape));
    std::vector<Mat> grads;
    for (Parameter* p : params) grads.push_back(p->grad);
    zero_grads(params);
    const double lr = 1e-6;
    const UpdateInfo info = reinforce_update(run, params, lr);
    REQUIRE(info.applied);
    int compared = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Mat delta = params[i]->value - before[i];
      for (Eigen::Index k = 0; k < delta.size(); ++k) {
        const double gk = grads[i](k);
        if (std::abs(gk) < 1e-6) continue;
        // Adam's first step is -lr * g / (|g| + eps).
        CHECK(delta(k) == doctest::Approx(-lr * gk / (std::abs(gk) + 1e-8)).epsilon(1e-6));
        ++compared;
      }
    }
    CHECK(compared > 20);
  }
}

TEST_CASE("REINFORCE drives a two-armed bandit to the better arm") {
  for (std::uint64_t seed : {1, 2, 3}) CHECK(givenet::testing::bandit_better_arm_probability(seed, 2000, 0.01) > 0.95);
}

TEST_CASE("curriculum_tick") {
  CheckpointRecord r;
  r.accuracy = {1, 1, 0.70, 0.60, 1, 1, 1, 1, 1, 1};
  CurriculumState s;
  s.phase = Phase::give_n;
  s.n_max = 3;
  CHECK(curriculum_tick(s, r, 0.66, 10).n_max == 4);
  s.n_max = 4;
  CHECK(curriculum_tick(s, r, 0.66, 10).n_max == 4);
  s.n_max = 10;
  CHECK(curriculum_tick(s, r, 0.66, 10).n_max == 10);
  s.n_max = 3;
  r.accuracy[2] = 20.0 / 30.0;
  CHECK(curriculum_tick(s, r, 0.66, 10).n_max == 4);
}

TEST_CASE("trainer") {
  const Counter& c = small_counter();
  const RunSettings s = tiny_settings(6, 8);

  SUBCASE("phase boundary, instruction range and curriculum log") {
    Trainer tr(s, AgentKind::dot_product, c, 5);
    tr.keep_drawn_instructions(true);
    std::vector<int> nmax_at_draw;
    while (tr.episode() < s.train.total_episodes) {
      const Phase before = tr.curriculum().phase;
      const int nmax = tr.curriculum().n_max;
      const long ep = tr.episode();
      tr.run(ep + 1);
      if (before == Phase::select_ones) CHECK(ep < s.train.step1_episodes);
      if (ep >= s.train.step1_episodes) {
        CHECK(before == Phase::give_n);
        nmax_at_draw.push_back(nmax);
      }
    }
    REQUIRE(tr.drawn_instructions().size() == nmax_at_draw.size());
    for (std::size_t i = 0; i < nmax_at_draw.size(); ++i) {
      CHECK(tr.drawn_instructions()[i] >= 1);
      CHECK(tr.drawn_instructions()[i] <= nmax_at_draw[i]);
    }
    for (std::size_t i = 1; i < nmax_at_draw.size(); ++i) CHECK(nmax_at_draw[i] >= nmax_at_draw[i - 1]);
    CHECK(tr.records().size() == 10);
    CHECK(tr.records().back().episode == 1000);
    REQUIRE_FALSE(tr.events().empty());
    CHECK(tr.events().front().episode == 200);
  }

  SUBCASE("every agent kind completes a smoke run and leaves the counter untouched") {
    const Mat e = c.encoder().weight().value, su = c.successor_map().weight().value;
    for (AgentKind kind : {AgentKind::esbn, AgentKind::dot_product, AgentKind::lstm, AgentKind::transformer}) {
      CAPTURE(to_string(kind));
      Trainer tr(s, kind, c, 6);
      tr.run();
      CHECK(tr.episode() == 1000);
      CHECK(tr.records().size() == 10);
    }
    CHECK(c.encoder().weight().value == e);
    CHECK(c.successor_map().weight().value == su);
  }

  SUBCASE("same seed, same records; different seed, different records") {
    Trainer a(s, AgentKind::esbn, c, 7), b(s, AgentKind::esbn, c, 7), d(s, AgentKind::esbn, c, 8);
    a.run(500);
    b.run(500);
    d.run(500);
    REQUIRE(a.records().size() == b.records().size());
    for (std::size_t i = 0; i < a.records().size(); ++i) CHECK(a.records()[i].accuracy == b.records()[i].accuracy);
    const ParamList pa = a.agent().parameters(), pb = b.agent().parameters(), pd = d.agent().parameters();
    bool differs = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
      CHECK(pa[i]->value == pb[i]->value);
      differs = differs || pa[i]->value != pd[i]->value;
    }
    CHECK(differs);
  }

  SUBCASE("resuming from saved state matches an uninterrupted run") {
    Trainer straight(s, AgentKind::transformer, c, 9);
    straight.run(700);
    Trainer first(s, AgentKind::transformer, c, 9);
    first.run(300);
    const Checkpoint saved = first.save_state();
    Trainer resumed(s, AgentKind::transformer, c, 9);
    resumed.load_state(saved);
    CHECK(resumed.episode() == 300);
    resumed.run(700);
    CHECK(resumed.curriculum().n_max == straight.curriculum().n_max);
    REQUIRE(resumed.records().size() == straight.records().size());
    for (std::size_t i = 0; i < straight.records().size(); ++i)
      CHECK(resumed.records()[i].accuracy == straight.records()[i].accuracy);
    const ParamList p1 = straight.agent().parameters(), p2 = resumed.agent().parameters();
    for (std::size_t i = 0; i < p1.size(); ++i) {
      CHECK(p1[i]->value == p2[i]->value);
      CHECK(p1[i]->adam_v == p2[i]->adam_v);
    }
    CHECK(resumed.events().size() == straight.events().size());
  }

  SUBCASE("evaluation does not disturb training randomness") {
    RunSettings step1_only = s;
    step1_only.train.total_episodes = 400;
    step1_only.train.step1_episodes = 399;
    RunSettings rare = step1_only;
    rare.train.checkpoint_interval = 400;
    Trainer a(step1_only, AgentKind::lstm, c, 10), b(rare, AgentKind::lstm, c, 10);
    a.run(399);
    b.run(399);
    CHECK(a.records().size() == 3);
    CHECK(b.records().empty());
    const ParamList pa = a.agent().parameters(), pb = b.agent().parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);
  }

  SUBCASE("startup checks") {
    CounterConfig cc;
    cc.length = 6;
    cc.embedding_dim = 8;
    RngStream rng(1);
    const Counter unfrozen(cc, rng);
    CHECK_THROWS_AS(Trainer(s, AgentKind::lstm, unfrozen, 1), ConfigError);
    RunSettings bad = s;
    bad.agent.object_dim = 13;
    CHECK_THROWS_AS(Trainer(bad, AgentKind::lstm, c, 1), ConfigError);
    bad = s;
    bad.eval.extrap_max = 7;
    CHECK_THROWS_AS(Trainer(bad, AgentKind::lstm, c, 1), ConfigError);
  }
}

TEST_CASE("train config validation") {
  struct Row {
    const char* what;
    void (*mutate)(TrainConfig&);
  };
  const Row rows[] = {
      {"zero total", [](TrainConfig& t) { t.total_episodes = 0; }},
      {"step1 not below total", [](TrainConfig& t) { t.step1_episodes = t.total_episodes; }},
      {"negative lr", [](TrainConfig& t) { t.lr = -1; }},
      {"zero interval", [](TrainConfig& t) { t.checkpoint_interval = 0; }},
      {"threshold above one", [](TrainConfig& t) { t.threshold = 1.5; }},
      {"zero cap", [](TrainConfig& t) { t.n_max_cap = 0; }},
      {"negative clip", [](TrainConfig& t) { t.grad_clip = -1; }},
  };
  CHECK_NOTHROW(TrainConfig{}.validate());
  for (const Row& r : rows) {
    CAPTURE(r.what);
    TrainConfig t;
    r.mutate(t);
    CHECK_THROWS_AS(t.validate(), ConfigError);
  }
}
