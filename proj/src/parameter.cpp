#include "givenet/parameter.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace givenet {

Parameter::Parameter(std::string n, Eigen::Index rows, Eigen::Index cols)
    : name(std::move(n)),
      value(Mat::Zero(rows, cols)),
      grad(Mat::Zero(rows, cols)),
      adam_m(Mat::Zero(rows, cols)),
      adam_v(Mat::Zero(rows, cols)) {}

void Parameter::init_uniform(RngStream& rng, double bound) {
  for (Eigen::Index r = 0; r < value.rows(); ++r)
    for (Eigen::Index c = 0; c < value.cols(); ++c) value(r, c) = rng.uniform(-bound, bound);
}

namespace {

void adam_apply(Parameter& p, double lr, const AdamConfig& cfg) {
  p.step_count += 1;
  const auto t = static_cast<double>(p.step_count);
  p.adam_m = cfg.beta1 * p.adam_m + (1.0 - cfg.beta1) * p.grad;
  p.adam_v = cfg.beta2 * p.adam_v + (1.0 - cfg.beta2) * p.grad.cwiseProduct(p.grad);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  p.value.array() -=
      lr * (p.adam_m.array() / c1) / ((p.adam_v.array() / c2).sqrt() + cfg.eps);
  p.grad.setZero();
}

}  // namespace

void adam_update(Parameter& p, double lr, const AdamConfig& cfg) {
  if (!p.grad.allFinite()) throw NumericError("adam_update: non-finite gradient in " + p.name);
  adam_apply(p, lr, cfg);
}

void adam_update(std::span<Parameter* const> params, double lr, const AdamConfig& cfg) {
  for (const Parameter* p : params)
    if (!p->grad.allFinite()) throw NumericError("adam_update: non-finite gradient in " + p->name);
  for (Parameter* p : params) adam_apply(*p, lr, cfg);
}

void zero_grads(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

bool grads_all_zero(std::span<Parameter* const> params) {
  for (const Parameter* p : params)
    if ((p->grad.array() != 0.0).any()) return false;
  return true;
}

double clip_grad_norm(std::span<Parameter* const> params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (Parameter* p : params) p->grad *= s;
  }
  return norm;
}

// --- checkpoint text format ---

namespace {

void write_matrix(std::ostream& os, const char* tag, const Mat& m) {
  os << tag;
  char buf[64];
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof buf, " %a", m(r, c));
      os << buf;
    }
  os << '\n';
}

Mat read_matrix(std::istream& is, const char* tag, Eigen::Index rows, Eigen::Index cols) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("checkpoint: truncated before " + std::string(tag));
  std::istringstream ls(line);
  std::string got;
  ls >> got;
  if (got != tag) throw std::runtime_error("checkpoint: expected '" + std::string(tag) + "', got '" + got + "'");
  Mat m(rows, cols);
  std::string tok;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!(ls >> tok)) throw std::runtime_error("checkpoint: too few values for " + std::string(tag));
      char* end = nullptr;
      m(r, c) = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0') throw std::runtime_error("checkpoint: bad number '" + tok + "'");
    }
  if (ls >> tok) throw std::runtime_error("checkpoint: too many values for " + std::string(tag));
  return m;
}

}  // namespace

void Checkpoint::write(std::ostream& os) const {
  os << "givenet-checkpoint " << kVersion << '\n';
  for (const auto& [k, v] : header) os << "header " << k << ' ' << v << '\n';
  for (const Parameter& p : tensors) {
    os << "tensor " << p.name << ' ' << p.rows() << ' ' << p.cols() << ' ' << p.step_count << '\n';
    write_matrix(os, "value", p.value);
    write_matrix(os, "adam_m", p.adam_m);
    write_matrix(os, "adam_v", p.adam_v);
  }
  os << "end\n";
}

Checkpoint Checkpoint::read(std::istream& is) {
  Checkpoint ck;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("checkpoint: empty input");
  {
    std::istringstream ls(line);
    std::string magic;
    int version = 0;
    ls >> magic >> version;
    if (magic != "givenet-checkpoint") throw std::runtime_error("checkpoint: bad magic");
    if (version != kVersion) throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "end") return ck;
    if (kind == "header") {
      std::string k, v;
      ls >> k;
      std::getline(ls >> std::ws, v);
      ck.header[k] = v;
    } else if (kind == "tensor") {
      Parameter p;
      Eigen::Index rows = 0, cols = 0;
      ls >> p.name >> rows >> cols >> p.step_count;
      if (!ls || rows < 0 || cols < 0) throw std::runtime_error("checkpoint: bad tensor line");
      p.value = read_matrix(is, "value", rows, cols);
      p.adam_m = read_matrix(is, "adam_m", rows, cols);
      p.adam_v = read_matrix(is, "adam_v", rows, cols);
      p.grad = Mat::Zero(rows, cols);
      ck.tensors.push_back(std::move(p));
    } else {
      throw std::runtime_error("checkpoint: unexpected line '" + line + "'");
    }
  }
  throw std::runtime_error("checkpoint: missing end marker");
}

void Checkpoint::save(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + tmp);
    write(os);
    if (!os) throw std::runtime_error("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw std::runtime_error("cannot rename to " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path);
  return read(is);
}

const Parameter& Checkpoint::find(const std::string& name) const {
  for (const Parameter& p : tensors)
    if (p.name == name) return p;
  throw std::runtime_error("checkpoint: no tensor named " + name);
}

Checkpoint make_checkpoint(std::span<Parameter* const> params, bool with_optimizer_state) {
  Checkpoint ck;
  ck.tensors.reserve(params.size());
  for (const Parameter* p : params) {
    Parameter copy = *p;
    if (!with_optimizer_state) {
      copy.adam_m.setZero();
      copy.adam_v.setZero();
      copy.step_count = 0;
    }
    ck.tensors.push_back(std::move(copy));
  }
  return ck;
}

void restore_checkpoint(const Checkpoint& ckpt, std::span<Parameter* const> params,
                        bool with_optimizer_state) {
  for (Parameter* p : params) {
    const Parameter& src = ckpt.find(p->name);
    if (src.rows() != p->rows() || src.cols() != p->cols())
      throw ConfigError("checkpoint: shape mismatch for " + p->name);
    p->value = src.value;
    p->grad.setZero();
    if (with_optimizer_state) {
      p->adam_m = src.adam_m;
      p->adam_v = src.adam_v;
      p->step_count = src.step_count;
    }
  }
}

}  // namespace givenet
