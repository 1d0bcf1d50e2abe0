#include "givenet/counter.hpp"

#include <algorithm>

namespace givenet {

Counter::Counter(const CounterConfig& cfg, RngStream& rng) : length_(cfg.length) {
  require(cfg.length >= 2, "counter length must be at least 2");
  require(cfg.embedding_dim >= 1, "counter embedding_dim must be positive");
  encoder_ = Linear("counter.encoder", cfg.length, cfg.embedding_dim, cfg.bias, rng);
  successor_ = Linear("counter.successor", cfg.embedding_dim, cfg.embedding_dim, cfg.bias, rng);
  decoder_ = Linear("counter.decoder", cfg.embedding_dim, cfg.length, cfg.bias, rng);
  require(cfg.init_scale > 0.0, "counter init_scale must be positive");
  for (Parameter* p : parameters()) p->value *= cfg.init_scale;
}

Vec Counter::one_hot(int n) const {
  require(n >= 1 && n <= length_, "count " + std::to_string(n) + " outside 1.." + std::to_string(length_));
  Vec x = Vec::Zero(length_);
  x(n - 1) = 1.0;
  return x;
}

Vec Counter::encode(const Vec& x) const {
  require(x.size() == length_, "encode: expected a one-hot of length " + std::to_string(length_));
  int ones = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x(i) == 1.0) {
      ++ones;
    } else if (x(i) != 0.0) {
      ones = -1;
      break;
    }
  }
  require(ones == 1, "encode: input is not a one-hot vector");
  return encoder_.apply(x);
}

Vec Counter::successor(const Vec& z) const { return successor_.apply(z); }

Vec Counter::decode(const Vec& z) const { return decoder_.apply(z); }

int Counter::decode_count(const Vec& z) const {
  Eigen::Index idx = 0;
  decode(z).maxCoeff(&idx);
  return static_cast<int>(idx) + 1;
}

std::vector<Vec> Counter::rollout(int instruction, int steps) const {
  require(instruction >= 1 && instruction <= length_,
          "rollout: instruction " + std::to_string(instruction) + " outside 1.." + std::to_string(length_));
  require(steps >= 0, "rollout: negative step count");
  std::vector<Vec> z;
  z.reserve(static_cast<std::size_t>(steps) + 1);
  z.push_back(encode(instruction));
  if (steps >= 1) z.push_back(encode(1));
  for (int t = 2; t <= steps; ++t) z.push_back(successor(z.back()));
  return z;
}

RoundTripTable Counter::round_trip_table() const {
  RoundTripTable table;
  table.length = length_;
  table.correct.resize(static_cast<std::size_t>(length_));
  for (int n = 1; n <= length_; ++n) {
    Vec z = encode(n);
    for (int i = 0; i <= length_ - n; ++i) {
      if (i > 0) z = successor(z);
      const bool ok = decode_count(z) == n + i;
      table.correct[static_cast<std::size_t>(n - 1)].push_back(ok);
      table.num_correct += ok ? 1 : 0;
      ++table.num_pairs;
    }
  }
  return table;
}

ParamList Counter::parameters() {
  ParamList out;
  encoder_.collect(out);
  successor_.collect(out);
  decoder_.collect(out);
  return out;
}

Checkpoint Counter::to_checkpoint() const {
  auto& self = const_cast<Counter&>(*this);
  Checkpoint ck = make_checkpoint(self.parameters(), false);
  ck.header["kind"] = "counter";
  ck.header["frozen"] = frozen_ ? "1" : "0";
  ck.header["length"] = std::to_string(length_);
  ck.header["embedding_dim"] = std::to_string(embedding_dim());
  ck.header["bias"] = encoder_.has_bias() ? "1" : "0";
  return ck;
}

Counter Counter::from_checkpoint(const Checkpoint& ckpt) {
  auto get = [&](const std::string& k) {
    auto it = ckpt.header.find(k);
    if (it == ckpt.header.end()) throw ConfigError("counter checkpoint: missing header field " + k);
    return it->second;
  };
  if (get("kind") != "counter") throw ConfigError("checkpoint is not a counter checkpoint");
  CounterConfig cfg;
  cfg.length = std::stoi(get("length"));
  cfg.embedding_dim = std::stoi(get("embedding_dim"));
  cfg.bias = get("bias") == "1";
  RngStream scratch(0);
  Counter c(cfg, scratch);
  restore_checkpoint(ckpt, c.parameters(), false);
  c.frozen_ = get("frozen") == "1";
  return c;
}

Var counter_sample_loss(Tape& tape, Counter& counter, int n, int i, const CounterConfig& cfg) {
  const Var x = tape.constant(counter.one_hot(n));
  const Var e = counter.encoder().forward(tape, x);
  Var z = e;
  for (int k = 0; k < i; ++k) z = counter.successor_map().forward(tape, z);
  const Var out = counter.decoder().forward(tape, z);
  Var loss = tape.mse(out, counter.one_hot(n + i));
  if (i != 0 && cfg.penalty_weight != 0.0) {
    Var sim = tape.dot(e, z);
    if (cfg.hinge_penalty) sim = tape.relu(sim);
    loss = tape.add(loss, tape.scale(sim, cfg.penalty_weight));
  }
  return loss;
}

PretrainReport pretrain_counter(Counter& counter, const CounterConfig& cfg, RngStream& rng) {
  require(!counter.frozen(), "pretrain_counter: counter is frozen");
  require(cfg.check_every > 0 && cfg.max_steps > 0, "pretrain_counter: step settings must be positive");
  const ParamList params = counter.parameters();
  const int len = counter.length();
  PretrainReport report;
  double loss_acc = 0.0;
  long loss_n = 0;
  for (long step = 1; step <= cfg.max_steps; ++step) {
    const int n = static_cast<int>(rng.uniform_int(1, len));
    const int i = static_cast<int>(rng.uniform_int(0, len - n));
    Tape tape;
    const Var loss = counter_sample_loss(tape, counter, n, i, cfg);
    loss_acc += tape.scalar(loss);
    ++loss_n;
    tape.backward(loss);
    adam_update(params, cfg.lr);
    report.steps = step;
    if (step % cfg.check_every == 0 && step >= cfg.min_steps) {
      report.mean_recent_loss = loss_acc / static_cast<double>(loss_n);
      loss_acc = 0.0;
      loss_n = 0;
      report.table = counter.round_trip_table();
      if (report.table.perfect()) {
        report.success = true;
        break;
      }
    }
  }
  if (!report.success) report.table = counter.round_trip_table();
  report.success = report.table.perfect();
  if (report.success) counter.freeze();
  return report;
}

}  // namespace givenet
