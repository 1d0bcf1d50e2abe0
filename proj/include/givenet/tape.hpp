#pragma once

#include "givenet/parameter.hpp"
#include "givenet/tensor.hpp"

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

namespace givenet {

/// Handle to a value recorded on a Tape.
struct Var {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode recorder for the handful of vector ops the models need.
/// Every value is a column vector; matrices only appear as Parameters, whose
/// gradients are accumulated directly into Parameter::grad on backward().
///
/// A tape lives for one episode (or one loss evaluation). Parameters it
/// references must outlive it.
class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) { nodes_.reserve(256); }

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }
  const Vec& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  double scalar(Var v) const { return value(v)(0); }

  Var constant(Vec v);
  /// Vector-shaped parameter (single column) as a differentiable leaf.
  Var leaf(Parameter& p);

  /// W x (+ b).
  Var affine(Parameter& weight, Parameter* bias, Var x);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var concat(std::span<const Var> parts);
  Var concat(std::initializer_list<Var> parts) { return concat(std::span<const Var>(parts.begin(), parts.size())); }
  Var slice(Var a, Eigen::Index offset, Eigen::Index length);

  Var sigmoid(Var a);
  Var tanh(Var a);
  Var relu(Var a);

  Var softmax(Var a);
  Var log_softmax(Var a);
  /// Scalar a[i].
  Var pick(Var a, Eigen::Index i);
  Var dot(Var a, Var b);
  Var sum(Var a);
  /// Scalar cosine similarity with the 1e-8 norm guard.
  Var cosine(Var a, Var b);
  /// mean((a - target)^2) as a scalar.
  Var mse(Var a, const Vec& target);

  /// Similarity-weighted memory read: w = softmax_i(gain * cos(query, values[i])),
  /// returns sum_i w_i keys[i]. Writes w into *weights when non-null. `gain`
  /// multiplies the similarities before the softmax.
  Var cosine_read(Var query, std::span<const Var> keys, std::span<const Var> values, Vec* weights = nullptr,
                  double gain = 1.0);

  /// One scaled dot-product attention head over the [offset, offset+length)
  /// slice of query, keys and values. Writes the attention row into *weights.
  Var attend(Var query, std::span<const Var> keys, std::span<const Var> values, Eigen::Index offset,
             Eigen::Index length, Vec* weights = nullptr);

  Var layer_norm(Var x, Parameter& gain, Parameter& bias, double eps = 1e-5);

  /// Backpropagates d(root)/d(.) with root a scalar (seed 1).
  void backward(Var root);
  /// Backpropagates sum_k seed_k * root_k for scalar roots.
  void backward(std::span<const std::pair<Var, double>> seeds);

  const Vec& grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].grad; }

 private:
  using Backward = std::function<void(Tape&, std::size_t)>;

  struct Node {
    Vec value;
    Vec grad;
    bool needs_grad = false;
    Backward backward;
  };

  Var push(Vec value, bool needs_grad, Backward backward);
  bool needs(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].needs_grad; }
  Node& node(Var v) { return nodes_[static_cast<std::size_t>(v.id)]; }
  /// Gradient slot of v, zero-initialized on first use.
  Vec& acc(Var v);
  Vec& acc(std::size_t id);

  bool grad_enabled_;
  std::vector<Node> nodes_;
};

}  // namespace givenet
