#include "givenet/config.hpp"

#include <fstream>
#include "json.hpp"
#include <set>
#include <sstream>

namespace givenet {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Reads `key` into `out` if present, then forgets it so leftovers can be reported.
template <typename T>
void take(json& obj, const char* key, T& out, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
  obj.erase(it);
}

void reject_leftovers(const json& obj, const std::string& where) {
  if (!obj.empty()) throw ConfigError(where + ": unknown key '" + obj.begin().key() + "'");
}

json section(json& root, const char* key) {
  auto it = root.find(key);
  if (it == root.end()) return json::object();
  if (!it->is_object()) throw ConfigError(std::string(key) + ": expected an object");
  json out = *it;
  root.erase(it);
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  const TrainConfig& t = run.train;
  const EnvConfig& e = run.env;
  const EvalConfig& v = run.eval;
  const AgentConfig& a = run.agent;
  require(!seeds.empty(), "seeds: at least one seed is required");
  require(std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() == seeds.size(), "seeds: duplicate seed");
  require(workers >= 1, "workers must be at least 1");
  require(!output_dir.empty(), "output_dir must not be empty");

  require(counter.length >= 2, "counter.length must be at least 2");
  require(counter.embedding_dim >= 1, "counter.embedding_dim must be positive");
  require(counter.lr > 0.0, "counter.lr must be positive");
  require(counter.penalty_weight >= 0.0, "counter.penalty_weight must be non-negative");
  require(counter.init_scale > 0.0, "counter.init_scale must be positive");
  require(counter.check_every >= 1, "counter.check_every must be positive");
  require(counter.min_steps >= 0 && counter.min_steps <= counter.max_steps,
          "counter.min_steps must lie between 0 and counter.max_steps");

  e.validate();
  t.validate();

  require(v.test_episodes >= 1, "evaluation.test_episodes must be positive");
  require(v.train_min == 1, "evaluation.train_min must be 1");
  require(v.train_max == t.n_max_cap, "evaluation.train_max must equal training.n_max_cap");
  require(v.extrap_min == v.train_max + 1, "evaluation.extrap_min must directly follow evaluation.train_max");
  require(v.extrap_max >= v.extrap_min, "evaluation.extrap_max must be at least evaluation.extrap_min");
  require(v.extrap_max <= counter.length, "evaluation.extrap_max must not exceed counter.length");
  require(t.n_max_cap + e.extra_objects <= e.max_objects,
          "training.n_max_cap + environment.extra_objects must not exceed environment.max_objects");
  require(v.extrap_max + e.extra_objects <= e.max_objects,
          "evaluation.extrap_max + environment.extra_objects must not exceed environment.max_objects");

  require(a.hidden >= 1 && a.key_dim >= 1 && a.mlp_hidden >= 1 && a.heads >= 1, "model sizes must be positive");
  require(a.retrieval_gain > 0.0, "model.retrieval_gain must be positive");
  if (agent == AgentKind::transformer)
    require((counter.embedding_dim + e.length) % a.heads == 0,
            "model.heads must divide counter.embedding_dim + environment.length");
}

RunSettings ExperimentConfig::run_settings() const {
  RunSettings s = run;
  s.agent.object_dim = s.env.length;
  s.agent.num_actions = s.env.num_actions();
  s.agent.embedding_dim = counter.embedding_dim;
  s.eval.threshold = s.train.threshold;
  return s;
}

ExperimentConfig default_config() { return ExperimentConfig{}; }

ExperimentConfig scaled_config() {
  ExperimentConfig c;
  c.output_dir = "runs/scaled";
  c.counter.length = 9;
  c.counter.embedding_dim = 32;
  c.counter.min_steps = 50000;
  EnvConfig& e = c.run.env;
  e.length = 20;
  e.extra_objects = 5;
  e.max_objects = 18;
  e.select_ones_min = 10;
  e.select_ones_max = 18;
  e.select_ones_steps = 10;
  e.give_n_max_steps = 20;
  AgentConfig& a = c.run.agent;
  a.hidden = 64;
  a.key_dim = 32;
  a.heads = 4;
  a.mlp_hidden = 64;
  TrainConfig& t = c.run.train;
  t.total_episodes = 150000;
  t.step1_episodes = 10000;
  t.lr = 1e-3;
  t.n_max_cap = 6;
  EvalConfig& v = c.run.eval;
  v.train_max = 6;
  v.extrap_min = 7;
  v.extrap_max = 9;
  c.seeds = {1, 2, 3, 4, 5};
  return c;
}

ExperimentConfig config_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& err) {
    throw ConfigError(std::string("config is not valid JSON: ") + err.what());
  }
  if (!root.is_object()) throw ConfigError("config: top level must be an object");
  ExperimentConfig c;
  std::string agent = to_string(c.agent);
  take(root, "agent", agent, "config");
  c.agent = parse_agent_kind(agent);
  take(root, "seeds", c.seeds, "config");
  take(root, "output_dir", c.output_dir, "config");
  take(root, "workers", c.workers, "config");

  json cn = section(root, "counter");
  take(cn, "seed", c.counter_seed, "counter");
  take(cn, "length", c.counter.length, "counter");
  take(cn, "embedding_dim", c.counter.embedding_dim, "counter");
  take(cn, "penalty_weight", c.counter.penalty_weight, "counter");
  take(cn, "hinge_penalty", c.counter.hinge_penalty, "counter");
  take(cn, "bias", c.counter.bias, "counter");
  take(cn, "init_scale", c.counter.init_scale, "counter");
  take(cn, "lr", c.counter.lr, "counter");
  take(cn, "min_steps", c.counter.min_steps, "counter");
  take(cn, "max_steps", c.counter.max_steps, "counter");
  take(cn, "check_every", c.counter.check_every, "counter");
  reject_leftovers(cn, "counter");

  json en = section(root, "environment");
  EnvConfig& e = c.run.env;
  take(en, "length", e.length, "environment");
  take(en, "extra_objects", e.extra_objects, "environment");
  take(en, "max_objects", e.max_objects, "environment");
  take(en, "select_ones_min", e.select_ones_min, "environment");
  take(en, "select_ones_max", e.select_ones_max, "environment");
  take(en, "select_ones_steps", e.select_ones_steps, "environment");
  take(en, "give_n_max_steps", e.give_n_max_steps, "environment");
  reject_leftovers(en, "environment");

  json mo = section(root, "model");
  AgentConfig& a = c.run.agent;
  take(mo, "hidden", a.hidden, "model");
  take(mo, "key_dim", a.key_dim, "model");
  take(mo, "heads", a.heads, "model");
  take(mo, "mlp_hidden", a.mlp_hidden, "model");
  take(mo, "forget_bias", a.forget_bias, "model");
  take(mo, "write_at_t0", a.write_at_t0, "model");
  take(mo, "retrieval_gain", a.retrieval_gain, "model");
  take(mo, "positional_encoding", a.positional_encoding, "model");
  take(mo, "mean_pool_readout", a.mean_pool_readout, "model");
  reject_leftovers(mo, "model");

  json tr = section(root, "training");
  TrainConfig& t = c.run.train;
  take(tr, "total_episodes", t.total_episodes, "training");
  take(tr, "step1_episodes", t.step1_episodes, "training");
  take(tr, "lr", t.lr, "training");
  take(tr, "checkpoint_interval", t.checkpoint_interval, "training");
  take(tr, "threshold", t.threshold, "training");
  take(tr, "n_max_cap", t.n_max_cap, "training");
  take(tr, "entropy_bonus", t.entropy_bonus, "training");
  take(tr, "grad_clip", t.grad_clip, "training");
  reject_leftovers(tr, "training");

  json ev = section(root, "evaluation");
  EvalConfig& v = c.run.eval;
  take(ev, "test_episodes", v.test_episodes, "evaluation");
  take(ev, "train_min", v.train_min, "evaluation");
  take(ev, "train_max", v.train_max, "evaluation");
  take(ev, "extrap_min", v.extrap_min, "evaluation");
  take(ev, "extrap_max", v.extrap_max, "evaluation");
  reject_leftovers(ev, "evaluation");

  reject_leftovers(root, "config");
  return c;
}

std::string config_to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["agent"] = to_string(c.agent);
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir;
  j["workers"] = c.workers;
  j["counter"] = {{"seed", c.counter_seed},
                  {"length", c.counter.length},
                  {"embedding_dim", c.counter.embedding_dim},
                  {"penalty_weight", c.counter.penalty_weight},
                  {"hinge_penalty", c.counter.hinge_penalty},
                  {"bias", c.counter.bias},
                  {"init_scale", c.counter.init_scale},
                  {"lr", c.counter.lr},
                  {"min_steps", c.counter.min_steps},
                  {"max_steps", c.counter.max_steps},
                  {"check_every", c.counter.check_every}};
  const EnvConfig& e = c.run.env;
  j["environment"] = {{"length", e.length},
                      {"extra_objects", e.extra_objects},
                      {"max_objects", e.max_objects},
                      {"select_ones_min", e.select_ones_min},
                      {"select_ones_max", e.select_ones_max},
                      {"select_ones_steps", e.select_ones_steps},
                      {"give_n_max_steps", e.give_n_max_steps}};
  const AgentConfig& a = c.run.agent;
  j["model"] = {{"hidden", a.hidden},
                {"key_dim", a.key_dim},
                {"heads", a.heads},
                {"mlp_hidden", a.mlp_hidden},
                {"forget_bias", a.forget_bias},
                {"write_at_t0", a.write_at_t0},
                {"retrieval_gain", a.retrieval_gain},
                {"positional_encoding", a.positional_encoding},
                {"mean_pool_readout", a.mean_pool_readout}};
  const TrainConfig& t = c.run.train;
  j["training"] = {{"total_episodes", t.total_episodes},
                   {"step1_episodes", t.step1_episodes},
                   {"lr", t.lr},
                   {"checkpoint_interval", t.checkpoint_interval},
                   {"threshold", t.threshold},
                   {"n_max_cap", t.n_max_cap},
                   {"entropy_bonus", t.entropy_bonus},
                   {"grad_clip", t.grad_clip}};
  const EvalConfig& v = c.run.eval;
  j["evaluation"] = {{"test_episodes", v.test_episodes},
                     {"train_min", v.train_min},
                     {"train_max", v.train_max},
                     {"extrap_min", v.extrap_min},
                     {"extrap_max", v.extrap_max}};
  return j.dump(2) + "\n";
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  ExperimentConfig c;
  try {
    c = config_from_json(ss.str());
    c.validate();
  } catch (const ConfigError& err) {
    throw ConfigError(path.string() + ": " + err.what());
  }
  return c;
}

}  // namespace givenet
