// Acceptance run: one PASS/FAIL line per criterion 1-8.
#include "givenet/agents.hpp"
#include "givenet/curve_fit.hpp"
#include "givenet/grad_check.hpp"
#include "givenet/layers.hpp"
#include "givenet/replay_oracle.hpp"
#include "givenet/report.hpp"
#include "givenet/run_dir.hpp"
#include "support.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

using namespace givenet;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::mutex out_mutex;

void note(const std::string& s) {
  std::lock_guard lock(out_mutex);
  std::cout << "    " << s << std::endl;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Vec random_vec(RngStream& rng, int n) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.uniform(-1, 1);
  return v;
}

Vec random_bits(RngStream& rng, int n) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.uniform01() < 0.5 ? 1.0 : 0.0;
  return v;
}

const AgentKind kKinds[] = {AgentKind::esbn, AgentKind::dot_product, AgentKind::lstm, AgentKind::transformer};

// ---- 1: finite differences on every layer and every agent step ----

Verdict gradients() {
  RngStream rng(101);
  double worst = 0.0;
  std::string where = "-";
  int checks = 0;
  auto track = [&](const GradCheckResult& r, const std::string& what) {
    ++checks;
    if (r.max_relative_error >= worst) {
      worst = r.max_relative_error;
      where = what + ": " + r.worst;
    }
  };
  for (int trial = 0; trial < 10; ++trial) {
    const int in = 2 + static_cast<int>(rng.uniform_int(0, 4));
    const int out = 3 + static_cast<int>(rng.uniform_int(0, 3));
    const int heads = 1 + static_cast<int>(rng.uniform_int(0, 2));
    const int d = heads * static_cast<int>(rng.uniform_int(1, 3));
    Linear lin("lin", in, out, true, rng);
    LstmCell cell("cell", out, static_cast<int>(rng.uniform_int(1, 5)), rng);
    TransformerLayer tl("tl", d, heads, static_cast<int>(rng.uniform_int(2, 6)), rng);
    Parameter g("g", out, 1), b("b", out, 1), key("key", out, 1);
    g.init_uniform(rng, 1.0);
    b.init_uniform(rng, 1.0);
    key.init_uniform(rng, 1.0);
    const Vec x = random_vec(rng, in);
    std::vector<Vec> xs, rows;
    for (int i = 0; i < 3; ++i) xs.push_back(random_vec(rng, out));
    const int len = static_cast<int>(rng.uniform_int(1, 4));
    for (int i = 0; i < len; ++i) rows.push_back(random_vec(rng, d));

    ParamList p;
    lin.collect(p);
    track(grad_check([&](Tape& t) { return t.sum(t.tanh(lin.forward(t, t.constant(x)))); }, p, rng), "linear");

    p.clear();
    cell.collect(p);
    track(grad_check(
              [&](Tape& t) {
                LstmState s = cell.zero_state(t);
                for (const Vec& v : xs) s = cell.forward(t, t.constant(v), s);
                return t.sum(t.mul(s.h, s.c));
              },
              p, rng),
          "lstm cell");

    p.clear();
    tl.collect(p);
    track(grad_check(
              [&](Tape& t) {
                std::vector<Var> seq;
                for (const Vec& r : rows) seq.push_back(t.constant(r));
                Var loss = t.constant(Vec::Zero(1));
                for (Var o : tl.forward(t, seq)) loss = t.add(loss, t.sum(t.mul(o, t.sigmoid(o))));
                return loss;
              },
              p, rng),
          "transformer layer");

    p = {&g, &b, &key};
    track(grad_check(
              [&](Tape& t) {
                const Var y = t.constant(xs[0]);
                const Var n = t.layer_norm(t.mul(y, t.leaf(key)), g, b);
                const Var kv = t.leaf(key);
                const Var read = t.cosine_read(n, std::vector<Var>{kv, y}, std::vector<Var>{n, t.relu(kv)});
                Var loss = t.add(t.sum(t.softmax(read)), t.pick(t.log_softmax(n), 0));
                return t.add(loss, t.cosine(kv, n));
              },
              p, rng),
          "layer norm / memory read / softmax");
  }

  for (AgentKind kind : kKinds) {
    for (int trial = 0; trial < 3; ++trial) {
      AgentConfig c;
      c.object_dim = static_cast<int>(rng.uniform_int(3, 6));
      c.num_actions = c.object_dim + 1;
      c.embedding_dim = static_cast<int>(rng.uniform_int(2, 5));
      c.heads = 1 + static_cast<int>((c.object_dim + c.embedding_dim) % 2 == 0);
      c.hidden = static_cast<int>(rng.uniform_int(3, 7));
      c.key_dim = static_cast<int>(rng.uniform_int(2, 4));
      c.mlp_hidden = static_cast<int>(rng.uniform_int(3, 7));
      auto agent = make_agent(kind, c, rng);
      const int steps = static_cast<int>(rng.uniform_int(2, 6));
      std::vector<Vec> zs, os;
      std::vector<int> actions;
      std::vector<double> returns;
      for (int t = 0; t < steps; ++t) {
        zs.push_back(random_vec(rng, c.embedding_dim));
        os.push_back(random_bits(rng, c.object_dim));
        actions.push_back(static_cast<int>(rng.uniform_int(0, c.num_actions - 1)));
        returns.push_back(rng.uniform(-3, 3));
      }
      const ParamList params = agent->parameters();
      GradCheckOptions opts;
      opts.coords_per_param = 12;
      track(grad_check(
                [&](Tape& tape) {
                  agent->reset(tape);
                  Var loss = tape.constant(Vec::Zero(1));
                  for (int t = 0; t < steps; ++t) {
                    const AgentOutput out = agent->step(tape, zs[t], os[t], false);
                    loss = tape.add(loss, tape.scale(tape.pick(out.log_probs, actions[t]), -returns[t]));
                  }
                  return loss;
                },
                params, rng, opts),
            std::string(to_string(kind)) + " agent episode");
    }
  }
  return {worst < 1e-4, std::to_string(checks) + " checks, worst relative error " + fmt("%.2e", worst) + " (" + where + ")"};
}

// ---- 2: counter pre-training at length 15, frozen through RL ----

Verdict counter_fidelity(const fs::path& out) {
  ExperimentConfig cfg = default_config();
  cfg.output_dir = (out / "counter15").string();
  fs::remove_all(cfg.output_dir);
  const auto t0 = Clock::now();
  const PretrainOutcome p = pretrain_to_directory(cfg);
  note("length-15 counter: " + std::to_string(p.report.table.num_correct) + "/" +
       std::to_string(p.report.table.num_pairs) + " pairs after " + std::to_string(p.report.steps) + " steps, " +
       fmt("%.0f s", seconds_since(t0)));
  if (!p.success) return {false, "pre-training did not reach 100% within the step budget"};

  const Counter counter = load_counter_for(cfg);
  std::ostringstream before;
  counter.to_checkpoint().write(before);

  ExperimentConfig rl = cfg;
  rl.run = testing::tiny_settings(15, 128);
  rl.run.eval.extrap_max = 6;
  rl.run.train.total_episodes = 1000;
  const TrainOutcome r = train_to_directory(rl, 1, counter);
  std::ostringstream after;
  counter.to_checkpoint().write(after);
  const bool stable = before.str() == after.str() && sha256_file(counter_checkpoint_path(cfg)) == sha256_hex(before.str());
  const bool all = p.report.table.perfect() && stable && r.complete;
  return {all, std::to_string(p.report.table.num_correct) + "/" + std::to_string(p.report.table.num_pairs) +
                   " round-trip pairs; counter weights " + (stable ? "bit-identical" : "CHANGED") + " after " +
                   std::to_string(r.episode) + " RL episodes"};
}

// ---- 3: environment against the replay oracle ----

Verdict oracle_equivalence() {
  RngStream rng(303);
  long episodes = 0, mismatches = 0;
  for (const EnvConfig cfg : {EnvConfig{}, EnvConfig{20, 5, 18, 10, 18, 10, 20}, EnvConfig{12, 3, 10, 3, 10, 5, 6}}) {
    for (int k = 0; k < 5000; ++k, ++episodes) {
      const int n = static_cast<int>(rng.uniform_int(1, cfg.max_instruction()));
      const GiveNState initial = reset_give_n(n, rng, cfg);
      GiveNState s = initial;
      std::vector<int> actions;
      std::vector<double> rewards;
      std::vector<bool> terminal;
      while (!s.terminal) {
        int a;
        const double u = rng.uniform01();
        if (u < 0.01 * (s.t + 1))
          a = cfg.done_action();
        else if (u < 0.8 && popcount(s.objects) > 0) {
          do a = static_cast<int>(rng.uniform_int(0, cfg.length - 1));
          while (!s.objects[static_cast<std::size_t>(a)]);
        } else {
          a = static_cast<int>(rng.uniform_int(0, cfg.length));
        }
        const StepOutcome o = step_give_n(s, a, cfg);
        actions.push_back(a);
        rewards.push_back(o.reward);
        terminal.push_back(o.terminal);
        s = o.next_state;
      }
      const OracleResult oracle = oracle_episode_check(initial, actions, cfg);
      double total = 0.0;
      for (double r : rewards) total += r;
      // Oracle replays prefixes too: terminal exactly at the last action.
      bool ok = oracle.terminated && oracle.rewards == rewards && oracle.total_reward == total &&
                oracle.steps_used == actions.size();
      for (std::size_t i = 0; ok && i + 1 < actions.size(); ++i) {
        const OracleResult prefix = oracle_episode_check(initial, std::span(actions).first(i + 1), cfg);
        ok = !terminal[i] && prefix.steps_used == i + 1;
      }
      mismatches += ok ? 0 : 1;
    }
  }
  return {mismatches == 0 && episodes >= 10000,
          std::to_string(episodes) + " random episodes, " + std::to_string(mismatches) + " disagreements"};
}

// ---- 4: curve fitting ----

Verdict fit_recovery() {
  std::vector<double> x;
  for (int n = 1; n <= 10; ++n) x.push_back(n);
  auto sample = [&](CurveFamily f, const std::vector<double>& p) {
    std::vector<double> y;
    for (double v : x) y.push_back(evaluate_curve(f, p, v));
    return y;
  };
  RngStream rng(404);
  double worst = 0.0;
  const int trials = 200;
  for (int i = 0; i < trials; ++i) {
    const double n0 = rng.uniform(3.0, 7.0), k = rng.uniform(1.5, 3.0);
    auto y = sample(CurveFamily::sigmoidal, {10000, 100000, k, n0});
    for (double& v : y) {
      const double g = std::sqrt(-2 * std::log(1 - rng.uniform01())) * std::cos(2 * M_PI * rng.uniform01());
      v += 0.02 * 100000 * g;
    }
    const FitResult f = fit_family(CurveFamily::sigmoidal, x, y);
    worst = std::max(worst, f.inflection ? std::abs(*f.inflection - n0) : INFINITY);
  }
  const std::pair<CurveFamily, std::vector<double>> exact[] = {
      {CurveFamily::linear, {3000, 1000}},
      {CurveFamily::exponential, {500, 0.4, 2000}},
      {CurveFamily::logarithmic, {20000, 3000}},
      {CurveFamily::sigmoidal, {10000, 100000, 2, 4.5}},
  };
  int selected = 0;
  for (const auto& [family, params] : exact) selected += best_fit(fit_all(x, sample(family, params))).family == family;
  return {worst <= 0.2 && selected == 4, "worst N0 error " + fmt("%.3f", worst) + " over " + std::to_string(trials) +
                                            " noisy sigmoids; BIC picked the generating family " +
                                            std::to_string(selected) + "/4"};
}

// ---- 5, 6: scaled ensemble ----

struct Ensemble {
  std::map<AgentKind, EnsembleSummary> summary;
  std::vector<LoadedRun> runs;
  bool ok = false;
  std::string error;
};

Ensemble scaled_ensemble(const fs::path& out, int workers) {
  Ensemble ens;
  ExperimentConfig base = scaled_config();
  base.output_dir = (out / "scaled").string();
  note("scaled config: L=" + std::to_string(base.run.env.length) + ", counter length " +
       std::to_string(base.counter.length) + ", training N 1.." + std::to_string(base.run.train.n_max_cap) +
       ", extrapolation " + std::to_string(base.run.eval.extrap_min) + ".." + std::to_string(base.run.eval.extrap_max) +
       ", " + std::to_string(base.run.train.total_episodes) + " episodes, seeds 1..5");
  if (!fs::exists(counter_checkpoint_path(base))) {
    const PretrainOutcome p = pretrain_to_directory(base);
    if (!p.success) {
      ens.error = "scaled counter pre-training failed";
      return ens;
    }
  }
  const Counter counter = load_counter_for(base);

  struct Job {
    AgentKind kind;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (AgentKind k : kKinds)
    for (std::uint64_t s : base.seeds) jobs.push_back({k, s});
  std::atomic<std::size_t> next{0};
  std::atomic<int> failures{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      ExperimentConfig c = base;
      c.agent = jobs[i].kind;
      const auto t0 = Clock::now();
      try {
        const TrainOutcome r = train_to_directory(c, jobs[i].seed, counter);
        note(std::string(to_string(c.agent)) + " seed " + std::to_string(jobs[i].seed) +
             (r.already_complete ? ": already complete" : ": trained in " + fmt("%.0f s", seconds_since(t0))));
      } catch (const std::exception& e) {
        note(std::string(to_string(c.agent)) + " seed " + std::to_string(jobs[i].seed) + " failed: " + e.what());
        ++failures;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int k = 1; k < workers; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failures > 0) {
    ens.error = std::to_string(failures.load()) + " scaled runs failed";
    return ens;
  }

  ens.runs = collect_runs({base.output_dir});
  const std::string summary = write_report(ens.runs, out / "scaled-report");
  note("report written to " + (out / "scaled-report").string());
  for (AgentKind k : kKinds) {
    std::vector<RunResult> rs;
    for (const auto& r : ens.runs)
      if (r.config.agent == k) rs.push_back(r.result);
    ens.summary[k] = ensemble_summary(rs, base.run_settings().eval);
  }
  // Every run trained against the same unmodified counter.
  const std::string counter_hash = sha256_file(counter_checkpoint_path(base));
  for (const auto& r : ens.runs) {
    const auto m = slurp(r.path / "manifest.json");
    if (m.find(counter_hash) == std::string::npos) {
      ens.error = r.path.string() + " was trained against a different counter";
      return ens;
    }
  }
  ens.ok = true;
  return ens;
}

double extrapolation_mean(const EnsembleSummary& s, const EvalConfig& e) {
  double sum = 0.0;
  for (int n = e.extrap_min; n <= e.extrap_max; ++n) sum += s.accuracy_at_best.at(n).mean;
  return sum / (e.extrap_max - e.extrap_min + 1);
}

Verdict developmental(const Ensemble& ens) {
  if (!ens.ok) return {false, ens.error};
  const EvalConfig e = scaled_config().run_settings().eval;
  for (AgentKind k : kKinds) {
    const auto& s = ens.summary.at(k);
    std::string line = std::string(to_string(k)) + ": all-N crossing " + std::to_string(s.included_runs) + "/" +
                       std::to_string(s.total_runs) + ", extrapolation " + fmt("%.3f", extrapolation_mean(s, e)) +
                       ", mean crossing by N:";
    for (const auto& [n, m] : s.crossing_episode) line += " " + fmt("%.0f", m.mean);
    note(line);
  }
  auto crossing_ok = [&](AgentKind k) {
    const auto& s = ens.summary.at(k);
    if (s.included_runs < 4) return false;
    double prev = -1;
    for (const auto& [n, m] : s.crossing_episode) {
      if (m.mean < prev) return false;
      prev = m.mean;
    }
    return true;
  };
  const bool a = crossing_ok(AgentKind::esbn) && crossing_ok(AgentKind::dot_product);
  const double esbn = extrapolation_mean(ens.summary.at(AgentKind::esbn), e);
  const double lstm = extrapolation_mean(ens.summary.at(AgentKind::lstm), e);
  const double tf = extrapolation_mean(ens.summary.at(AgentKind::transformer), e);
  const bool b = esbn - lstm >= 0.3;
  const bool c = lstm < 0.1 && tf < 0.1;
  note(std::string("5a ") + (a ? "PASS" : "FAIL") + ": esbn and dot cross every training N in >= 4/5 seeds, mean crossings non-decreasing");
  note(std::string("5b ") + (b ? "PASS" : "FAIL") + ": esbn extrapolation - lstm = " + fmt("%.3f", esbn - lstm) + " (need >= 0.3)");
  note(std::string("5c ") + (c ? "PASS" : "FAIL") + ": lstm " + fmt("%.3f", lstm) + ", transformer " + fmt("%.3f", tf) + " (need < 0.1)");
  return {a && b && c, std::string("5a ") + (a ? "pass" : "fail") + ", 5b " + (b ? "pass" : "fail") + ", 5c " +
                           (c ? "pass" : "fail") + "; seeds 1..5 per architecture"};
}

Verdict inflection(const Ensemble& ens) {
  if (!ens.ok) return {false, ens.error};
  const auto& s = ens.summary.at(AgentKind::esbn);
  const bool pass = s.included_runs > 0 && 2 * s.sigmoid_preferred > s.included_runs;
  std::string d = "BIC prefers sigmoidal in " + std::to_string(s.sigmoid_preferred) + "/" +
                  std::to_string(s.included_runs) + " qualifying esbn seeds";
  if (s.inflection.n > 0) d += "; N0 " + fmt("%.2f", s.inflection.mean) + " +- " + fmt("%.2f", s.inflection.sd);
  d += " (full-scale reference 4.38 +- 0.39, not binding)";
  return {pass, d};
}

// ---- 7: bit-exact rerun from the snapshot ----

Verdict reproducibility(const fs::path& out) {
  ExperimentConfig cfg = load_config(GIVENET_SOURCE_DIR "/configs/smoke.json");
  cfg.output_dir = (out / "smoke-a").string();
  fs::remove_all(cfg.output_dir);
  const auto t0 = Clock::now();
  if (!pretrain_to_directory(cfg).success) return {false, "smoke counter failed to pre-train"};
  const Counter counter = load_counter_for(cfg);
  const std::uint64_t seed = cfg.seeds.front();
  const TrainOutcome a = train_to_directory(cfg, seed, counter);
  const double first = seconds_since(t0);

  ExperimentConfig again = load_config(a.directory / "config.json");
  again.output_dir = (out / "smoke-b").string();
  fs::remove_all(again.output_dir);
  fs::create_directories(counter_dir(again));
  fs::copy_file(counter_checkpoint_path(cfg), counter_checkpoint_path(again));
  const TrainOutcome b = train_to_directory(again, again.seeds.front(), load_counter_for(again));
  const bool same = slurp(a.directory / "metrics.csv") == slurp(b.directory / "metrics.csv") &&
                    slurp(a.directory / "final.ckpt") == slurp(b.directory / "final.ckpt");
  return {same && a.episode == 2000 && first < 60.0,
          std::string("2,000-episode esbn smoke run, seed ") + std::to_string(seed) + ": metrics.csv and final weights " +
              (same ? "bit-identical" : "DIFFER") + " on rerun from the snapshot; first run " + fmt("%.1f s", first)};
}

// ---- 8: bandit ----

Verdict bandit() {
  double worst = 1.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed)
    worst = std::min(worst, testing::bandit_better_arm_probability(seed, 2000, 0.01));
  return {worst > 0.95, "P(better arm) after 2,000 episodes, lowest over seeds 1..5: " + fmt("%.4f", worst)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks for the give-N experiment suite"};
  std::string out = "acceptance-output";
  std::vector<int> only;
  int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  app.add_option("-o,--out", out, "working directory (completed scaled runs are reused)");
  app.add_option("--only", only, "criteria to run, e.g. --only 1,3")->delimiter(',');
  app.add_option("-j,--workers", workers, "parallel scaled runs");
  CLI11_PARSE(app, argc, argv);
  const fs::path root(out);
  fs::create_directories(root);

  auto wanted = [&](int k) { return only.empty() || std::find(only.begin(), only.end(), k) != only.end(); };
  std::map<int, Verdict> results;
  const char* names[] = {"",
                         "gradient correctness",
                         "counter fidelity",
                         "environment oracle equivalence",
                         "fit recovery",
                         "scaled developmental reproduction",
                         "inflection presence",
                         "reproducibility",
                         "REINFORCE sanity"};
  auto run = [&](int k, const std::function<Verdict()>& f) {
    if (!wanted(k)) return;
    std::cout << "criterion " << k << " (" << names[k] << ") ..." << std::endl;
    const auto t0 = Clock::now();
    try {
      results[k] = f();
    } catch (const std::exception& e) {
      results[k] = {false, std::string("error: ") + e.what()};
    }
    std::cout << "    " << fmt("%.1f s", seconds_since(t0)) << std::endl;
  };

  run(1, gradients);
  run(2, [&] { return counter_fidelity(root); });
  run(3, oracle_equivalence);
  run(4, fit_recovery);
  Ensemble ens;
  if (wanted(5) || wanted(6)) {
    std::cout << "scaled ensemble (criteria 5, 6) ..." << std::endl;
    try {
      ens = scaled_ensemble(root, workers);
    } catch (const std::exception& e) {
      ens.error = std::string("error: ") + e.what();
    }
  }
  run(5, [&] { return developmental(ens); });
  run(6, [&] { return inflection(ens); });
  run(7, [&] { return reproducibility(root); });
  run(8, bandit);

  std::ostringstream table;
  bool all = true;
  for (const auto& [k, v] : results) {
    table << "criterion " << k << ": " << (v.pass ? "PASS" : "FAIL") << "  " << names[k] << "  [" << v.detail << "]\n";
    all = all && v.pass;
  }
  std::cout << "\n" << table.str();
  std::ofstream(root / "acceptance.txt") << table.str();
  return all ? 0 : 1;
}
