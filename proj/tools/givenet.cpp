#include "givenet/config.hpp"
#include "givenet/report.hpp"
#include "givenet/run_dir.hpp"

#include <atomic>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "CLI11.hpp"

using namespace givenet;

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kUsage = 2;

std::mutex log_mutex;

void log_line(const std::string& s) {
  std::lock_guard lock(log_mutex);
  std::cerr << s << '\n';
}

struct Overrides {
  std::string output_dir;
  std::string agent;
  std::vector<std::uint64_t> seeds;
  int workers = 0;
};

ExperimentConfig load_with(const std::string& path, const Overrides& o) {
  ExperimentConfig cfg = load_config(path);
  if (!o.output_dir.empty()) cfg.output_dir = o.output_dir;
  if (!o.agent.empty()) cfg.agent = parse_agent_kind(o.agent);
  if (!o.seeds.empty()) cfg.seeds = o.seeds;
  if (o.workers > 0) cfg.workers = o.workers;
  cfg.validate();
  return cfg;
}

int cmd_init_config(bool scaled, const std::string& out) {
  const std::string text = config_to_json(scaled ? scaled_config() : default_config());
  if (out.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(out);
    if (!f) throw ConfigError("cannot write " + out);
    f << text;
  }
  return kOk;
}

int cmd_pretrain(const std::string& path, const Overrides& o) {
  const ExperimentConfig cfg = load_with(path, o);
  const PretrainOutcome res = pretrain_to_directory(cfg, log_line);
  std::cout << "counter: " << res.report.table.num_correct << "/" << res.report.table.num_pairs
            << " round-trip pairs correct after " << res.report.steps << " steps\n";
  if (!res.success) {
    std::cerr << "pre-training failed; report kept in " << res.directory.string() << "\n";
    return kRuntime;
  }
  std::cout << "wrote " << counter_checkpoint_path(cfg).string() << "\n";
  return kOk;
}

int cmd_train(const std::string& path, const Overrides& o, std::optional<long> until, bool keep) {
  const ExperimentConfig cfg = load_with(path, o);
  const Counter counter = load_counter_for(cfg);
  std::atomic<std::size_t> next{0};
  std::atomic<int> failures{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cfg.seeds.size(); i = next++) {
      const std::uint64_t seed = cfg.seeds[i];
      try {
        const TrainOutcome r = train_to_directory(cfg, seed, counter, until, keep, log_line);
        if (r.already_complete)
          log_line(r.directory.string() + ": already complete");
        else
          log_line(r.directory.string() + (r.complete ? ": complete at episode " : ": stopped at episode ") +
                   std::to_string(r.episode));
      } catch (const std::exception& e) {
        log_line("seed " + std::to_string(seed) + " failed: " + e.what());
        ++failures;
      }
    }
  };
  const int n = std::min<int>(cfg.workers, static_cast<int>(cfg.seeds.size()));
  std::vector<std::thread> pool;
  for (int k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return failures == 0 ? kOk : kRuntime;
}

int cmd_evaluate(const std::string& run, const std::string& which, int episodes, std::uint64_t seed,
                 const std::string& out) {
  const fs::path dir(run);
  const ExperimentConfig cfg = load_config(dir / "config.json");
  const fs::path ckpt_path = dir / (which + ".ckpt");
  if (!fs::exists(ckpt_path)) throw ConfigError("no " + which + " checkpoint in " + dir.string());
  const fs::path counter_path = dir.parent_path().parent_path() / "counter" / "counter.ckpt";
  if (!fs::exists(counter_path)) throw ConfigError("no counter checkpoint at " + counter_path.string());
  const Counter counter = Counter::from_checkpoint(Checkpoint::load(counter_path));
  RunSettings s = cfg.run_settings();
  if (episodes > 0) s.eval.test_episodes = episodes;
  RngStream init(0);
  auto agent = make_agent(cfg.agent, s.agent, init);
  const Checkpoint ck = Checkpoint::load(ckpt_path);
  agent->load_checkpoint(ck, false);
  const CountSequences counts(counter, s.eval.extrap_max, std::max(s.env.give_n_cap(), s.env.select_ones_steps));
  const long episode = ck.header.count("episode") ? std::stol(ck.header.at("episode")) : -1;
  const CheckpointRecord rec = evaluate_checkpoint(*agent, counts, s.env, s.eval, s.eval.extrap_max, RngStream(seed), episode);
  std::ostringstream os;
  os << "N,range,accuracy,correct,episodes\n";
  for (int n = 1; n <= rec.max_instruction(); ++n)
    os << n << ',' << (n <= s.eval.train_max ? "train" : "extrapolation") << ',' << rec.at(n) << ','
       << rec.correct[static_cast<std::size_t>(n - 1)] << ',' << rec.episodes_per_n << '\n';
  std::cout << "# " << to_string(cfg.agent) << " seed " << cfg.seeds[0] << ", " << which << " checkpoint (episode "
            << episode << ")\n"
            << os.str();
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw ConfigError("cannot write " + out);
    f << os.str();
  }
  return kOk;
}

int cmd_report(const std::vector<std::string>& dirs, const std::string& out) {
  std::vector<fs::path> paths(dirs.begin(), dirs.end());
  const auto runs = collect_runs(paths);
  if (runs.empty()) {
    std::cerr << "report: no run directories found\n";
    return kRuntime;
  }
  std::cout << write_report(runs, out);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Give-N counting experiments: counter pre-training, RL training, evaluation and reports"};
  app.require_subcommand(1);

  Overrides ov;
  std::string config_path;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "experiment config (JSON)")->required();
    sub->add_option("-o,--output-dir", ov.output_dir, "override output_dir");
  };

  bool scaled = false;
  std::string init_out;
  auto* init = app.add_subcommand("init-config", "print or write a config file with every default filled in");
  init->add_flag("--scaled", scaled, "desk-scale variant instead of the full-scale defaults");
  init->add_option("-o,--output", init_out, "file to write (default: stdout)");

  auto* pre = app.add_subcommand("pretrain-counter", "pre-train and freeze the counter");
  add_common(pre);

  std::optional<long> until;
  bool keep = false;
  auto* train = app.add_subcommand("train", "train one run per seed (resumes unfinished runs)");
  add_common(train);
  train->add_option("-a,--agent", ov.agent, "esbn | dot | lstm | transformer");
  train->add_option("-s,--seeds", ov.seeds, "seed list, e.g. --seeds 1 2 3")->delimiter(',');
  train->add_option("-j,--workers", ov.workers, "parallel runs");
  train->add_option("--until", until, "stop after this episode; rerun to resume");
  train->add_flag("--keep-checkpoints", keep, "also keep agent weights at every checkpoint");

  std::string run_path, which = "best", eval_out;
  int episodes = 0;
  std::uint64_t eval_seed = 12345;
  auto* eval = app.add_subcommand("evaluate", "greedy test of a trained run's checkpoint");
  eval->add_option("-r,--run", run_path, "run directory")->required();
  eval->add_option("--checkpoint", which, "best | final")->check(CLI::IsMember({"best", "final"}));
  eval->add_option("-n,--episodes", episodes, "test episodes per N (default: the run's setting)");
  eval->add_option("--seed", eval_seed, "seed for the test object vectors");
  eval->add_option("-o,--output", eval_out, "also write the table here");

  std::vector<std::string> report_dirs;
  std::string report_out = "report";
  auto* rep = app.add_subcommand("report", "figures, curve fits and summary over run directories");
  rep->add_option("runs", report_dirs, "run directories or parents of them")->required();
  rep->add_option("-o,--out", report_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*init) return cmd_init_config(scaled, init_out);
    if (*pre) return cmd_pretrain(config_path, ov);
    if (*train) return cmd_train(config_path, ov, until, keep);
    if (*eval) return cmd_evaluate(run_path, which, episodes, eval_seed, eval_out);
    if (*rep) return cmd_report(report_dirs, report_out);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
