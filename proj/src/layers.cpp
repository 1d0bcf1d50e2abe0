#include "givenet/layers.hpp"

#include <cmath>

namespace givenet {

namespace {

double init_bound(Eigen::Index fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

}  // namespace

Linear::Linear(const std::string& name, Eigen::Index in, Eigen::Index out, bool bias, RngStream& rng)
    : weight_(name + ".weight", out, in), bias_(name + ".bias", bias ? out : 0, 1), has_bias_(bias) {
  require(in > 0 && out > 0, "Linear " + name + ": dimensions must be positive");
  weight_.init_uniform(rng, init_bound(in));
  if (has_bias_) bias_.init_uniform(rng, init_bound(in));
}

Var Linear::forward(Tape& tape, Var x) { return tape.affine(weight_, has_bias_ ? &bias_ : nullptr, x); }

Vec Linear::apply(const Vec& x) const {
  require(x.size() == weight_.cols(), "Linear " + weight_.name + ": input dimension mismatch");
  Vec y = weight_.value * x;
  if (has_bias_) y += bias_.value.col(0);
  return y;
}

void Linear::collect(ParamList& out) {
  out.push_back(&weight_);
  if (has_bias_) out.push_back(&bias_);
}

LstmCell::LstmCell(const std::string& name, Eigen::Index input, Eigen::Index hidden, RngStream& rng,
                   double forget_bias)
    : w_input_(name + ".w_input", 4 * hidden, input),
      w_hidden_(name + ".w_hidden", 4 * hidden, hidden),
      bias_(name + ".bias", 4 * hidden, 1) {
  require(input > 0 && hidden > 0, "LstmCell " + name + ": dimensions must be positive");
  const double b = init_bound(input + hidden);
  w_input_.init_uniform(rng, b);
  w_hidden_.init_uniform(rng, b);
  bias_.init_uniform(rng, b);
  bias_.value.block(hidden, 0, hidden, 1).setConstant(forget_bias);
}

LstmState LstmCell::zero_state(Tape& tape) const {
  return {tape.constant(Vec::Zero(hidden_size())), tape.constant(Vec::Zero(hidden_size()))};
}

LstmState LstmCell::forward(Tape& tape, Var x, const LstmState& state) {
  const Eigen::Index h = hidden_size();
  const Var pre = tape.add(tape.affine(w_input_, &bias_, x), tape.affine(w_hidden_, nullptr, state.h));
  const Var in_gate = tape.sigmoid(tape.slice(pre, 0, h));
  const Var forget_gate = tape.sigmoid(tape.slice(pre, h, h));
  const Var candidate = tape.tanh(tape.slice(pre, 2 * h, h));
  const Var out_gate = tape.sigmoid(tape.slice(pre, 3 * h, h));
  const Var c = tape.add(tape.mul(forget_gate, state.c), tape.mul(in_gate, candidate));
  const Var hn = tape.mul(out_gate, tape.tanh(c));
  return {hn, c};
}

void LstmCell::collect(ParamList& out) {
  out.push_back(&w_input_);
  out.push_back(&w_hidden_);
  out.push_back(&bias_);
}

Vec positional_encoding(Eigen::Index position, Eigen::Index width) {
  Vec pe(width);
  for (Eigen::Index i = 0; i < width; ++i) {
    const double pair = static_cast<double>(i - (i % 2));
    const double angle = static_cast<double>(position) / std::pow(10000.0, pair / static_cast<double>(width));
    pe(i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
  }
  return pe;
}

TransformerLayer::TransformerLayer(const std::string& name, Eigen::Index d, int heads, Eigen::Index mlp,
                                   RngStream& rng)
    : heads_(heads),
      wq_(name + ".wq", d, d), bq_(name + ".bq", d, 1),
      wk_(name + ".wk", d, d), bk_(name + ".bk", d, 1),
      wv_(name + ".wv", d, d), bv_(name + ".bv", d, 1),
      wo_(name + ".wo", d, d), bo_(name + ".bo", d, 1),
      ln1_gain_(name + ".ln1_gain", d, 1), ln1_bias_(name + ".ln1_bias", d, 1),
      ln2_gain_(name + ".ln2_gain", d, 1), ln2_bias_(name + ".ln2_bias", d, 1),
      w1_(name + ".w1", mlp, d), b1_(name + ".b1", mlp, 1),
      w2_(name + ".w2", d, mlp), b2_(name + ".b2", d, 1) {
  require(heads > 0 && d > 0 && mlp > 0, "TransformerLayer " + name + ": dimensions must be positive");
  require(d % heads == 0, "TransformerLayer " + name + ": d_model " + std::to_string(d) +
                              " is not divisible by " + std::to_string(heads) + " heads");
  const double bd = init_bound(d);
  for (Parameter* p : {&wq_, &bq_, &wk_, &bk_, &wv_, &bv_, &wo_, &bo_, &w1_, &b1_}) p->init_uniform(rng, bd);
  const double bm = init_bound(mlp);
  w2_.init_uniform(rng, bm);
  b2_.init_uniform(rng, bm);
  ln1_gain_.value.setOnes();
  ln2_gain_.value.setOnes();
}

void TransformerLayer::project(Tape& tape, Cache& cache, Var row) {
  cache.rows.push_back(row);
  cache.keys.push_back(tape.affine(wk_, &bk_, row));
  cache.values.push_back(tape.affine(wv_, &bv_, row));
}

Var TransformerLayer::row_output(Tape& tape, Var row, Var query, const Cache& cache, std::vector<Vec>* attention) {
  const Eigen::Index d = d_model();
  const Eigen::Index dh = d / heads_;
  std::vector<Var> head_out;
  head_out.reserve(static_cast<std::size_t>(heads_));
  if (attention != nullptr) attention->assign(static_cast<std::size_t>(heads_), Vec());
  for (int h = 0; h < heads_; ++h) {
    Vec* w = attention != nullptr ? &(*attention)[static_cast<std::size_t>(h)] : nullptr;
    head_out.push_back(tape.attend(query, cache.keys, cache.values, h * dh, dh, w));
  }
  const Var mixed = tape.affine(wo_, &bo_, tape.concat(head_out));
  const Var u = tape.layer_norm(tape.add(row, mixed), ln1_gain_, ln1_bias_);
  const Var hidden = tape.relu(tape.affine(w1_, &b1_, u));
  const Var m = tape.affine(w2_, &b2_, hidden);
  return tape.layer_norm(tape.add(u, m), ln2_gain_, ln2_bias_);
}

std::vector<Var> TransformerLayer::forward(Tape& tape, const std::vector<Var>& seq,
                                           std::vector<std::vector<Vec>>* attention) {
  Cache cache;
  for (Var r : seq) {
    require(tape.value(r).size() == d_model(), "TransformerLayer: row width mismatch");
    project(tape, cache, r);
  }
  if (attention != nullptr) attention->assign(seq.size(), {});
  std::vector<Var> out;
  out.reserve(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const Var q = tape.affine(wq_, &bq_, seq[i]);
    out.push_back(row_output(tape, seq[i], q, cache, attention != nullptr ? &(*attention)[i] : nullptr));
  }
  return out;
}

Var TransformerLayer::forward_last(Tape& tape, Cache& cache, Var row, std::vector<Vec>* attention) {
  require(tape.value(row).size() == d_model(), "TransformerLayer: row width mismatch");
  project(tape, cache, row);
  const Var q = tape.affine(wq_, &bq_, row);
  return row_output(tape, row, q, cache, attention);
}

void TransformerLayer::collect(ParamList& out) {
  for (Parameter* p : {&wq_, &bq_, &wk_, &bk_, &wv_, &bv_, &wo_, &bo_, &ln1_gain_, &ln1_bias_, &w1_, &b1_, &w2_,
                       &b2_, &ln2_gain_, &ln2_bias_})
    out.push_back(p);
}

Parameter& TransformerLayer::param(const std::string& suffix) {
  ParamList all;
  collect(all);
  for (Parameter* p : all) {
    const auto dot = p->name.rfind('.');
    if (p->name.substr(dot + 1) == suffix) return *p;
  }
  throw ConfigError("TransformerLayer: no parameter " + suffix);
}

}  // namespace givenet
