#pragma once

#include "givenet/rng.hpp"
#include "givenet/tensor.hpp"

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace givenet {

/// A trainable tensor with its gradient accumulator and Adam moments.
/// Vectors are stored as single-column matrices.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Eigen::Index rows, Eigen::Index cols);

  std::string name;
  Mat value;
  Mat grad;
  Mat adam_m;
  Mat adam_v;
  long step_count = 0;

  Eigen::Index rows() const { return value.rows(); }
  Eigen::Index cols() const { return value.cols(); }
  Eigen::Index size() const { return value.size(); }

  void zero_grad() { grad.setZero(); }
  /// Uniform in [-bound, bound].
  void init_uniform(RngStream& rng, double bound);
};

using ParamList = std::vector<Parameter*>;

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam step on a single parameter, then zeroes its grad.
/// Throws NumericError (leaving the parameter untouched) on a non-finite grad.
void adam_update(Parameter& p, double lr, const AdamConfig& cfg = {});

/// Adam over a parameter set. Every gradient is checked before any value
/// changes, so a non-finite entry anywhere aborts the whole step.
void adam_update(std::span<Parameter* const> params, double lr, const AdamConfig& cfg = {});

void zero_grads(std::span<Parameter* const> params);
bool grads_all_zero(std::span<Parameter* const> params);
/// Scales all gradients so their joint L2 norm is at most max_norm.
double clip_grad_norm(std::span<Parameter* const> params, double max_norm);

/// Text checkpoint: header key/values plus named, shaped, row-major tensors
/// written as hex floats so a load reproduces every bit.
struct Checkpoint {
  static constexpr int kVersion = 1;

  std::map<std::string, std::string> header;
  std::vector<Parameter> tensors;

  void write(std::ostream& os) const;
  static Checkpoint read(std::istream& is);
  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  const Parameter& find(const std::string& name) const;
};

/// Snapshot of live parameters (optionally with optimizer moments).
Checkpoint make_checkpoint(std::span<Parameter* const> params, bool with_optimizer_state);
/// Copies tensors into live parameters by name; shapes must match exactly.
void restore_checkpoint(const Checkpoint& ckpt, std::span<Parameter* const> params,
                        bool with_optimizer_state);

}  // namespace givenet
