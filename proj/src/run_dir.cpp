#include "givenet/run_dir.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace givenet {

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& p, const std::string& text) {
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, p);
}

std::string round_trip_report(const RoundTripTable& t) {
  std::ostringstream os;
  os << "exhaustive round trip: " << t.num_correct << " / " << t.num_pairs << " pairs correct\n";
  os << "rows n, columns i (1 = argmax(d(s^i(e(x_n)))) == n + i)\n";
  for (int n = 1; n <= t.length; ++n) {
    os << (n < 10 ? " " : "") << n << ":";
    for (bool ok : t.correct[static_cast<std::size_t>(n - 1)]) os << ' ' << (ok ? '1' : '0');
    os << '\n';
  }
  return os.str();
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 || EVP_DigestFinal_ex(ctx, md, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("sha256 failed");
  }
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

void write_manifest(const fs::path& dir, const std::string& kind, bool complete, const std::string& extra_json) {
  nlohmann::ordered_json m;
  m["kind"] = kind;
  m["version"] = "givenet 0.1.0";
  m["complete"] = complete;
  m["info"] = nlohmann::ordered_json::parse(extra_json);
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().filename() != "manifest.json" &&
        entry.path().extension() != ".tmp")
      files.push_back(fs::relative(entry.path(), dir));
  std::sort(files.begin(), files.end());
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (const fs::path& f : files)
    list.push_back({{"path", f.generic_string()}, {"bytes", fs::file_size(dir / f)}, {"sha256", sha256_file(dir / f)}});
  m["files"] = list;
  write_file_atomic(dir / "manifest.json", m.dump(2) + "\n");
}

bool manifest_complete(const fs::path& dir) {
  const fs::path p = dir / "manifest.json";
  if (!fs::exists(p)) return false;
  try {
    return nlohmann::json::parse(read_file(p)).value("complete", false);
  } catch (const nlohmann::json::exception&) {
    return false;
  }
}

fs::path counter_dir(const ExperimentConfig& cfg) { return fs::path(cfg.output_dir) / "counter"; }
fs::path counter_checkpoint_path(const ExperimentConfig& cfg) { return counter_dir(cfg) / "counter.ckpt"; }
fs::path run_dir(const ExperimentConfig& cfg, std::uint64_t seed) {
  return fs::path(cfg.output_dir) / to_string(cfg.agent) / ("seed-" + std::to_string(seed));
}

ExperimentConfig run_snapshot(const ExperimentConfig& cfg, std::uint64_t seed) {
  ExperimentConfig one = cfg;
  one.seeds = {seed};
  one.workers = 1;
  return one;
}

PretrainOutcome pretrain_to_directory(const ExperimentConfig& cfg, const LogFn& log) {
  PretrainOutcome out;
  out.directory = counter_dir(cfg);
  fs::create_directories(out.directory);
  ExperimentConfig snap = cfg;
  write_file_atomic(out.directory / "config.json", config_to_json(snap));
  RngStream rng(cfg.counter_seed);
  Counter counter(cfg.counter, rng);
  if (log) log("pre-training counter (length " + std::to_string(cfg.counter.length) + ")");
  out.report = pretrain_counter(counter, cfg.counter, rng);
  out.success = out.report.success;
  std::ostringstream rep;
  rep << (out.success ? "status: success\n" : "status: FAILED (step budget exhausted)\n");
  rep << "steps: " << out.report.steps << "\n";
  rep << "mean recent loss: " << out.report.mean_recent_loss << "\n";
  rep << round_trip_report(out.report.table);
  write_file_atomic(out.directory / "report.txt", rep.str());
  if (out.success) counter.to_checkpoint().save(out.directory / "counter.ckpt");
  nlohmann::ordered_json info;
  info["steps"] = out.report.steps;
  info["round_trip_correct"] = out.report.table.num_correct;
  info["round_trip_pairs"] = out.report.table.num_pairs;
  write_manifest(out.directory, "counter", out.success, info.dump());
  return out;
}

Counter load_counter_for(const ExperimentConfig& cfg) {
  const fs::path p = counter_checkpoint_path(cfg);
  if (!fs::exists(p))
    throw ConfigError("no counter checkpoint at " + p.string() + "; run `givenet pretrain-counter` with this config first");
  Counter c = Counter::from_checkpoint(Checkpoint::load(p));
  if (!c.frozen()) throw ConfigError(p.string() + " is not a frozen counter");
  require(c.length() == cfg.counter.length && c.embedding_dim() == cfg.counter.embedding_dim,
          p.string() + " does not match counter.length / counter.embedding_dim of the config");
  return c;
}

std::string metrics_header(int max_instruction) {
  std::string h = "episode,phase,n_max";
  for (int n = 1; n <= max_instruction; ++n) h += ",acc_" + std::to_string(n);
  return h + "\n";
}

std::string metrics_row(const CheckpointRecord& r, Phase phase, int n_max) {
  std::ostringstream os;
  os << r.episode << ',' << to_string(phase) << ',' << n_max;
  char buf[32];
  for (double a : r.accuracy) {
    std::snprintf(buf, sizeof buf, ",%.6f", a);
    os << buf;
  }
  os << '\n';
  return os.str();
}

namespace {

// Moving or renaming a run directory does not make it a different run.
bool same_run(const fs::path& stored, const std::string& snapshot, const std::string& output_dir) {
  if (!fs::exists(stored)) return false;
  try {
    ExperimentConfig old = config_from_json(read_file(stored));
    old.output_dir = output_dir;
    return config_to_json(old) == snapshot;
  } catch (const ConfigError&) {
    return false;
  }
}

}  // namespace

TrainOutcome train_to_directory(const ExperimentConfig& cfg, std::uint64_t seed, const Counter& counter,
                                std::optional<long> stop_at, bool keep_checkpoints, const LogFn& log) {
  TrainOutcome out;
  out.directory = run_dir(cfg, seed);
  const fs::path dir = out.directory;
  const std::string snapshot = config_to_json(run_snapshot(cfg, seed));
  if (manifest_complete(dir)) {
    out.already_complete = out.complete = true;
    if (!same_run(dir / "config.json", snapshot, cfg.output_dir))
      throw ConfigError(dir.string() + " is a completed run with a different config");
    return out;
  }
  fs::create_directories(dir);
  const RunSettings settings = cfg.run_settings();
  Trainer trainer(settings, cfg.agent, counter, seed);
  const fs::path state_path = dir / "state.ckpt";
  if (fs::exists(state_path)) {
    if (!same_run(dir / "config.json", snapshot, cfg.output_dir))
      throw ConfigError(dir.string() + " holds a run with a different config; use another output_dir");
    trainer.load_state(Checkpoint::load(state_path));
    out.resumed = true;
    if (log) log(dir.string() + ": resuming at episode " + std::to_string(trainer.episode()));
  } else {
    write_file_atomic(dir / "config.json", snapshot);
  }

  // Rewrite the streams from the state so a crash between writes cannot duplicate rows.
  const int max_n = settings.eval.extrap_max;
  std::string metrics = metrics_header(max_n);
  for (const auto& r : trainer.records()) {
    int nmax = 1;
    for (const auto& e : trainer.events()) {
      const auto arrow = e.what.find("-> ");
      if (e.episode < r.episode && arrow != std::string::npos) nmax = std::stoi(e.what.substr(arrow + 3));
    }
    metrics += metrics_row(r, r.episode <= settings.train.step1_episodes ? Phase::select_ones : Phase::give_n, nmax);
  }
  write_file_atomic(dir / "metrics.csv", metrics);
  std::string curriculum_log;
  for (const auto& e : trainer.events()) curriculum_log += std::to_string(e.episode) + " " + e.what + "\n";
  write_file_atomic(dir / "curriculum.log", curriculum_log);

  double best_mean = -1.0;
  for (const auto& r : trainer.records()) best_mean = std::max(best_mean, r.mean(settings.eval.train_min, settings.eval.train_max));
  if (keep_checkpoints) fs::create_directories(dir / "checkpoints");

  std::ofstream metrics_out(dir / "metrics.csv", std::ios::app);
  std::ofstream log_out(dir / "curriculum.log", std::ios::app);
  std::size_t events_written = trainer.events().size();

  const auto hook = [&](const Trainer& t, const CheckpointRecord& r, const CurriculumState& during) {
    metrics_out << metrics_row(r, during.phase, during.n_max) << std::flush;
    for (; events_written < t.events().size(); ++events_written) {
      const auto& e = t.events()[events_written];
      log_out << e.episode << ' ' << e.what << '\n';
    }
    log_out.flush();
    Agent& agent = const_cast<Trainer&>(t).agent();
    const double mean = r.mean(settings.eval.train_min, settings.eval.train_max);
    if (mean > best_mean) {
      best_mean = mean;
      Checkpoint best = agent.to_checkpoint(false);
      best.header["episode"] = std::to_string(r.episode);
      best.save(dir / "best.ckpt");
    }
    if (keep_checkpoints) {
      char name[48];
      std::snprintf(name, sizeof name, "ep-%09ld.ckpt", r.episode);
      Checkpoint ck = agent.to_checkpoint(false);
      ck.header["episode"] = std::to_string(r.episode);
      ck.save(dir / "checkpoints" / name);
    }
    t.save_state().save(state_path);
    if (log) {
      std::ostringstream os;
      os << dir.string() << ": episode " << r.episode << " " << to_string(t.curriculum().phase)
         << " N_max=" << t.curriculum().n_max << " train-mean=" << mean;
      log(os.str());
    }
  };
  const long target = stop_at ? std::min(*stop_at, settings.train.total_episodes) : settings.train.total_episodes;
  trainer.run(target, hook);
  out.episode = trainer.episode();
  metrics_out.close();
  log_out.close();
  if (trainer.episode() >= settings.train.total_episodes) {
    Checkpoint fin = trainer.agent().to_checkpoint(false);
    fin.header["episode"] = std::to_string(trainer.episode());
    fin.save(dir / "final.ckpt");
    out.complete = true;
  } else {
    trainer.save_state().save(state_path);
  }
  nlohmann::ordered_json info;
  info["agent"] = to_string(cfg.agent);
  info["seed"] = seed;
  info["episode"] = trainer.episode();
  info["skipped_updates"] = trainer.skipped_updates();
  info["counter_sha256"] = sha256_hex([&] {
    std::ostringstream os;
    counter.to_checkpoint().write(os);
    return os.str();
  }());
  write_manifest(dir, "training-run", out.complete, info.dump());
  return out;
}

}  // namespace givenet
