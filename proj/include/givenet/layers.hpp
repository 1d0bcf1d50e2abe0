#pragma once

#include "givenet/parameter.hpp"
#include "givenet/rng.hpp"
#include "givenet/tape.hpp"

#include <string>
#include <vector>

namespace givenet {

/// Affine map y = W x (+ b). Weights and bias start uniform in
/// [-1/sqrt(fan_in), 1/sqrt(fan_in)].
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, Eigen::Index in, Eigen::Index out, bool bias, RngStream& rng);

  Var forward(Tape& tape, Var x);
  /// Tape-free evaluation.
  Vec apply(const Vec& x) const;

  Eigen::Index in_features() const { return weight_.cols(); }
  Eigen::Index out_features() const { return weight_.rows(); }
  bool has_bias() const { return has_bias_; }

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }
  const Parameter& weight() const { return weight_; }
  void collect(ParamList& out);

 private:
  Parameter weight_;
  Parameter bias_;
  bool has_bias_ = false;
};

struct LstmState {
  Var h;
  Var c;
};

/// Single-layer LSTM cell, gate blocks ordered input, forget, candidate,
/// output. The forget-gate bias starts at `forget_bias`.
class LstmCell {
 public:
  LstmCell() = default;
  LstmCell(const std::string& name, Eigen::Index input, Eigen::Index hidden, RngStream& rng,
           double forget_bias = 1.0);

  LstmState zero_state(Tape& tape) const;
  LstmState forward(Tape& tape, Var x, const LstmState& state);

  Eigen::Index input_size() const { return w_input_.cols(); }
  Eigen::Index hidden_size() const { return w_hidden_.cols(); }

  Parameter& w_input() { return w_input_; }
  Parameter& w_hidden() { return w_hidden_; }
  Parameter& bias() { return bias_; }
  void collect(ParamList& out);

 private:
  Parameter w_input_;
  Parameter w_hidden_;
  Parameter bias_;
};

/// Sinusoidal encoding: sin(pos / 10000^(2i/d)) on even slots, cos on odd.
Vec positional_encoding(Eigen::Index position, Eigen::Index width);

/// One post-norm transformer encoder layer:
///   u = LN1(x + MHA(x)),  y = LN2(u + W2 relu(W1 u + b1) + b2).
class TransformerLayer {
 public:
  /// Keys and values already projected for earlier rows.
  struct Cache {
    std::vector<Var> rows;
    std::vector<Var> keys;
    std::vector<Var> values;
  };

  TransformerLayer() = default;
  TransformerLayer(const std::string& name, Eigen::Index d_model, int heads, Eigen::Index mlp_hidden, RngStream& rng);

  /// Full unmasked layer over every row of the sequence.
  std::vector<Var> forward(Tape& tape, const std::vector<Var>& seq,
                           std::vector<std::vector<Vec>>* attention = nullptr);

  /// Appends `row` to the cache and returns the layer output at that row,
  /// attending over every cached row. Equals the last row of forward().
  Var forward_last(Tape& tape, Cache& cache, Var row, std::vector<Vec>* attention = nullptr);

  Eigen::Index d_model() const { return wq_.rows(); }
  int heads() const { return heads_; }
  void collect(ParamList& out);

  Parameter& param(const std::string& suffix);

 private:
  void project(Tape& tape, Cache& cache, Var row);
  Var row_output(Tape& tape, Var row, Var query, const Cache& cache, std::vector<Vec>* attention);

  int heads_ = 1;
  Parameter wq_, bq_, wk_, bk_, wv_, bv_, wo_, bo_;
  Parameter ln1_gain_, ln1_bias_, ln2_gain_, ln2_bias_;
  Parameter w1_, b1_, w2_, b2_;
};

}  // namespace givenet
