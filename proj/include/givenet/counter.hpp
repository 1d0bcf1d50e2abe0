#pragma once

#include "givenet/layers.hpp"
#include "givenet/parameter.hpp"
#include "givenet/rng.hpp"

#include <string>
#include <vector>

namespace givenet {

struct CounterConfig {
  int length = 15;           // size of the memorized count sequence
  int embedding_dim = 128;
  double penalty_weight = 1.0;
  // max(0, e.s^i(e)). The raw dot product is unbounded below and diverges.
  bool hinge_penalty = true;
  bool bias = false;
  // Multiplies the usual +-1/sqrt(fan_in) init. Small starts keep the parts of
  // e and s that the decoder cannot see small, so e(x_N) and s^(N-1)(e(x_1))
  // end up nearly parallel rather than merely decoding alike.
  double init_scale = 0.1;
  double lr = 1e-4;
  // Keep training at least this long even once every pair decodes.
  long min_steps = 100000;
  long max_steps = 500000;
  long check_every = 1000;
};

/// Accuracy of argmax(d(s^i(e(x_n)))) == n + i over every valid (n, i).
struct RoundTripTable {
  int length = 0;
  /// correct[n-1][i] for i in 0..length-n
  std::vector<std::vector<bool>> correct;
  long num_correct = 0;
  long num_pairs = 0;
  bool perfect() const { return num_correct == num_pairs; }
};

/// Encoder e, successor s and decoder d over one-hot counts 1..length.
class Counter {
 public:
  explicit Counter(const CounterConfig& cfg, RngStream& rng);

  int length() const { return length_; }
  int embedding_dim() const { return static_cast<int>(encoder_.out_features()); }

  /// One-hot x_n for n in 1..length.
  Vec one_hot(int n) const;
  /// e(x); x must be a valid one-hot.
  Vec encode(const Vec& x) const;
  Vec encode(int n) const { return encode(one_hot(n)); }
  Vec successor(const Vec& z) const;
  Vec decode(const Vec& z) const;
  /// 1-based argmax of d(z).
  int decode_count(const Vec& z) const;

  /// z_0 = e(x_N), z_1 = e(x_1), z_t = s(z_{t-1}) for t >= 2; T + 1 vectors.
  std::vector<Vec> rollout(int instruction, int steps) const;

  RoundTripTable round_trip_table() const;

  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }

  Linear& encoder() { return encoder_; }
  Linear& successor_map() { return successor_; }
  Linear& decoder() { return decoder_; }
  const Linear& encoder() const { return encoder_; }
  const Linear& successor_map() const { return successor_; }
  const Linear& decoder() const { return decoder_; }
  ParamList parameters();

  Checkpoint to_checkpoint() const;
  static Counter from_checkpoint(const Checkpoint& ckpt);

 private:
  Counter() = default;

  int length_ = 0;
  bool frozen_ = false;
  Linear encoder_;
  Linear successor_;
  Linear decoder_;
};

struct PretrainReport {
  bool success = false;
  long steps = 0;
  double mean_recent_loss = 0.0;
  RoundTripTable table;
};

/// One pre-training sample loss: MSE(d(s^i(e(x_n))), x_{n+i}) plus, for i != 0,
/// weight * e(x_n).s^i(e(x_n)).
Var counter_sample_loss(Tape& tape, Counter& counter, int n, int i, const CounterConfig& cfg);

/// Adam, batch size 1, n ~ U{1..L}, i ~ U{0..L-n}, until every (n, i) pair
/// decodes correctly (checked from min_steps on) or the step budget runs out.
/// Freezes on success.
PretrainReport pretrain_counter(Counter& counter, const CounterConfig& cfg, RngStream& rng);

}  // namespace givenet
