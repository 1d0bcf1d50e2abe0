#include "givenet/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace givenet {

Var Tape::push(Vec value, bool needs_grad, Backward backward) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = grad_enabled_ && needs_grad;
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Vec& Tape::acc(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() != n.value.size()) n.grad = Vec::Zero(n.value.size());
  return n.grad;
}

Vec& Tape::acc(Var v) { return acc(static_cast<std::size_t>(v.id)); }

Var Tape::constant(Vec v) { return push(std::move(v), false, nullptr); }

Var Tape::leaf(Parameter& p) {
  require(p.cols() == 1, "Tape::leaf: parameter " + p.name + " is not a vector");
  Parameter* pp = &p;
  return push(p.value.col(0), true, [pp](Tape& t, std::size_t self) { pp->grad.col(0) += t.nodes_[self].grad; });
}

Var Tape::affine(Parameter& weight, Parameter* bias, Var x) {
  const Vec& xv = value(x);
  require(weight.cols() == xv.size(), "affine " + weight.name + ": expected input " +
                                          std::to_string(weight.cols()) + ", got " + std::to_string(xv.size()));
  Vec out = weight.value * xv;
  if (bias != nullptr) {
    require(bias->rows() == weight.rows() && bias->cols() == 1, "affine: bias shape mismatch for " + bias->name);
    out += bias->value.col(0);
  }
  Parameter* w = &weight;
  return push(std::move(out), true, [w, bias, x](Tape& t, std::size_t self) {
    const Vec& g = t.nodes_[self].grad;
    w->grad.noalias() += g * t.value(x).transpose();
    if (bias != nullptr) bias->grad.col(0) += g;
    if (t.needs(x)) t.acc(x).noalias() += w->value.transpose() * g;
  });
}

Var Tape::add(Var a, Var b) {
  require(value(a).size() == value(b).size(), "Tape::add: size mismatch");
  return push(value(a) + value(b), needs(a) || needs(b), [a, b](Tape& t, std::size_t self) {
    const Vec& g = t.nodes_[self].grad;
    if (t.needs(a)) t.acc(a) += g;
    if (t.needs(b)) t.acc(b) += g;
  });
}

Var Tape::sub(Var a, Var b) {
  require(value(a).size() == value(b).size(), "Tape::sub: size mismatch");
  return push(value(a) - value(b), needs(a) || needs(b), [a, b](Tape& t, std::size_t self) {
    const Vec& g = t.nodes_[self].grad;
    if (t.needs(a)) t.acc(a) += g;
    if (t.needs(b)) t.acc(b) -= g;
  });
}

Var Tape::mul(Var a, Var b) {
  require(value(a).size() == value(b).size(), "Tape::mul: size mismatch");
  return push(value(a).cwiseProduct(value(b)), needs(a) || needs(b), [a, b](Tape& t, std::size_t self) {
    const Vec& g = t.nodes_[self].grad;
    if (t.needs(a)) t.acc(a) += g.cwiseProduct(t.value(b));
    if (t.needs(b)) t.acc(b) += g.cwiseProduct(t.value(a));
  });
}

Var Tape::scale(Var a, double s) {
  return push(value(a) * s, needs(a), [a, s](Tape& t, std::size_t self) { t.acc(a) += s * t.nodes_[self].grad; });
}

Var Tape::concat(std::span<const Var> parts) {
  Eigen::Index total = 0;
  bool ng = false;
  for (Var p : parts) {
    total += value(p).size();
    ng = ng || needs(p);
  }
  Vec out(total);
  Eigen::Index off = 0;
  for (Var p : parts) {
    const Vec& v = value(p);
    out.segment(off, v.size()) = v;
    off += v.size();
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return push(std::move(out), ng, [saved = std::move(saved)](Tape& t, std::size_t self) {
    Eigen::Index o = 0;
    for (Var p : saved) {
      const Eigen::Index n = t.value(p).size();
      if (t.needs(p)) t.acc(p) += t.nodes_[self].grad.segment(o, n);
      o += n;
    }
  });
}

Var Tape::slice(Var a, Eigen::Index offset, Eigen::Index length) {
  require(offset >= 0 && length >= 0 && offset + length <= value(a).size(), "Tape::slice: out of range");
  return push(value(a).segment(offset, length), needs(a), [a, offset, length](Tape& t, std::size_t self) {
    t.acc(a).segment(offset, length) += t.nodes_[self].grad;
  });
}

Var Tape::sigmoid(Var a) {
  Vec y = (1.0 + (-value(a).array()).exp()).inverse().matrix();
  return push(std::move(y), needs(a), [a](Tape& t, std::size_t self) {
    const Vec& y = t.nodes_[self].value;
    t.acc(a).array() += t.nodes_[self].grad.array() * y.array() * (1.0 - y.array());
  });
}

Var Tape::tanh(Var a) {
  Vec y = value(a).array().tanh().matrix();
  return push(std::move(y), needs(a), [a](Tape& t, std::size_t self) {
    const Vec& y = t.nodes_[self].value;
    t.acc(a).array() += t.nodes_[self].grad.array() * (1.0 - y.array().square());
  });
}

Var Tape::relu(Var a) {
  Vec y = value(a).cwiseMax(0.0);
  return push(std::move(y), needs(a), [a](Tape& t, std::size_t self) {
    const Vec& x = t.value(a);
    t.acc(a).array() += (x.array() > 0.0).select(t.nodes_[self].grad.array(), 0.0);
  });
}

Var Tape::softmax(Var a) {
  return push(givenet::softmax(value(a)), needs(a), [a](Tape& t, std::size_t self) {
    const Vec& y = t.nodes_[self].value;
    const Vec& g = t.nodes_[self].grad;
    const double s = g.dot(y);
    t.acc(a).array() += y.array() * (g.array() - s);
  });
}

Var Tape::log_softmax(Var a) {
  return push(givenet::log_softmax(value(a)), needs(a), [a](Tape& t, std::size_t self) {
    const Vec& y = t.nodes_[self].value;
    const Vec& g = t.nodes_[self].grad;
    t.acc(a).array() += g.array() - y.array().exp() * g.sum();
  });
}

Var Tape::pick(Var a, Eigen::Index i) {
  require(i >= 0 && i < value(a).size(), "Tape::pick: index out of range");
  Vec out(1);
  out(0) = value(a)(i);
  return push(std::move(out), needs(a), [a, i](Tape& t, std::size_t self) { t.acc(a)(i) += t.nodes_[self].grad(0); });
}

Var Tape::dot(Var a, Var b) {
  require(value(a).size() == value(b).size(), "Tape::dot: size mismatch");
  Vec out(1);
  out(0) = value(a).dot(value(b));
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, std::size_t self) {
    const double g = t.nodes_[self].grad(0);
    if (t.needs(a)) t.acc(a) += g * t.value(b);
    if (t.needs(b)) t.acc(b) += g * t.value(a);
  });
}

Var Tape::sum(Var a) {
  Vec out(1);
  out(0) = value(a).sum();
  return push(std::move(out), needs(a), [a](Tape& t, std::size_t self) { t.acc(a).array() += t.nodes_[self].grad(0); });
}

namespace {

// d cos(a,b) / da for cos = a.b / (|a||b| + eps).
Vec cosine_grad_a(const Vec& a, const Vec& b) {
  const double na = a.norm();
  const double nb = b.norm();
  const double denom = na * nb + kNormEps;
  Vec g = b / denom;
  if (na > 0.0) g -= (a.dot(b) * nb / (denom * denom * na)) * a;
  return g;
}

}  // namespace

Var Tape::cosine(Var a, Var b) {
  Vec out(1);
  out(0) = cosine_similarity(value(a), value(b));
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, std::size_t self) {
    const double g = t.nodes_[self].grad(0);
    if (t.needs(a)) t.acc(a) += g * cosine_grad_a(t.value(a), t.value(b));
    if (t.needs(b)) t.acc(b) += g * cosine_grad_a(t.value(b), t.value(a));
  });
}

Var Tape::mse(Var a, const Vec& target) {
  require(value(a).size() == target.size() && target.size() > 0, "Tape::mse: size mismatch");
  Vec out(1);
  out(0) = (value(a) - target).squaredNorm() / static_cast<double>(target.size());
  return push(std::move(out), needs(a), [a, target](Tape& t, std::size_t self) {
    const double g = t.nodes_[self].grad(0);
    t.acc(a) += (2.0 * g / static_cast<double>(target.size())) * (t.value(a) - target);
  });
}

Var Tape::cosine_read(Var query, std::span<const Var> keys, std::span<const Var> values, Vec* weights,
                      double gain) {
  require(!keys.empty() && keys.size() == values.size(), "cosine_read: keys/values mismatch");
  const std::size_t n = keys.size();
  const Vec& q = value(query);
  Vec sims(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) sims(static_cast<Eigen::Index>(i)) = gain * cosine_similarity(q, value(values[i]));
  Vec w = givenet::softmax(sims);
  if (weights != nullptr) *weights = w;
  Vec out = Vec::Zero(value(keys[0]).size());
  bool ng = needs(query);
  for (std::size_t i = 0; i < n; ++i) {
    require(value(keys[i]).size() == out.size(), "cosine_read: key width mismatch");
    out += w(static_cast<Eigen::Index>(i)) * value(keys[i]);
    ng = ng || needs(keys[i]) || needs(values[i]);
  }
  std::vector<Var> ks(keys.begin(), keys.end());
  std::vector<Var> vs(values.begin(), values.end());
  return push(std::move(out), ng, [query, ks = std::move(ks), vs = std::move(vs), w, gain](Tape& t, std::size_t self) {
    const Vec& g = t.nodes_[self].grad;
    const auto n = static_cast<Eigen::Index>(ks.size());
    Vec dw(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Var k = ks[static_cast<std::size_t>(i)];
      dw(i) = g.dot(t.value(k));
      if (t.needs(k)) t.acc(k) += w(i) * g;
    }
    const Vec ds = gain * w.cwiseProduct((dw.array() - w.dot(dw)).matrix());
    const Vec& q = t.value(query);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Var v = vs[static_cast<std::size_t>(i)];
      if (ds(i) == 0.0) continue;
      if (t.needs(query)) t.acc(query) += ds(i) * cosine_grad_a(q, t.value(v));
      if (t.needs(v)) t.acc(v) += ds(i) * cosine_grad_a(t.value(v), q);
    }
  });
}

Var Tape::attend(Var query, std::span<const Var> keys, std::span<const Var> values, Eigen::Index offset,
                 Eigen::Index length, Vec* weights) {
  require(!keys.empty() && keys.size() == values.size(), "attend: keys/values mismatch");
  const double sc = 1.0 / std::sqrt(static_cast<double>(length));
  const auto n = static_cast<Eigen::Index>(keys.size());
  const auto q = value(query).segment(offset, length);
  Vec scores(n);
  bool ng = needs(query);
  for (Eigen::Index j = 0; j < n; ++j) {
    scores(j) = sc * q.dot(value(keys[static_cast<std::size_t>(j)]).segment(offset, length));
    ng = ng || needs(keys[static_cast<std::size_t>(j)]) || needs(values[static_cast<std::size_t>(j)]);
  }
  Vec w = givenet::softmax(scores);
  if (weights != nullptr) *weights = w;
  Vec out = Vec::Zero(length);
  for (Eigen::Index j = 0; j < n; ++j) out += w(j) * value(values[static_cast<std::size_t>(j)]).segment(offset, length);
  std::vector<Var> ks(keys.begin(), keys.end());
  std::vector<Var> vs(values.begin(), values.end());
  return push(std::move(out), ng,
              [query, ks = std::move(ks), vs = std::move(vs), w, offset, length, sc](Tape& t, std::size_t self) {
                const Vec& g = t.nodes_[self].grad;
                const auto n = static_cast<Eigen::Index>(ks.size());
                Vec dw(n);
                for (Eigen::Index j = 0; j < n; ++j) {
                  const Var v = vs[static_cast<std::size_t>(j)];
                  dw(j) = g.dot(t.value(v).segment(offset, length));
                  if (t.needs(v)) t.acc(v).segment(offset, length) += w(j) * g;
                }
                const Vec ds = w.cwiseProduct((dw.array() - w.dot(dw)).matrix()) * sc;
                const Vec q = t.value(query).segment(offset, length);
                for (Eigen::Index j = 0; j < n; ++j) {
                  const Var k = ks[static_cast<std::size_t>(j)];
                  if (t.needs(query)) t.acc(query).segment(offset, length) += ds(j) * t.value(k).segment(offset, length);
                  if (t.needs(k)) t.acc(k).segment(offset, length) += ds(j) * q;
                }
              });
}

Var Tape::layer_norm(Var x, Parameter& gain, Parameter& bias, double eps) {
  const Vec& xv = value(x);
  const auto n = static_cast<double>(xv.size());
  require(gain.rows() == xv.size() && bias.rows() == xv.size(), "layer_norm: width mismatch");
  const double mu = xv.mean();
  const double var = (xv.array() - mu).square().sum() / n;
  const double inv_std = 1.0 / std::sqrt(var + eps);
  Vec xhat = (xv.array() - mu) * inv_std;
  Vec out = gain.value.col(0).cwiseProduct(xhat) + bias.value.col(0);
  Parameter* gp = &gain;
  Parameter* bp = &bias;
  return push(std::move(out), true, [x, gp, bp, xhat, inv_std, n](Tape& t, std::size_t self) {
    const Vec& g = t.nodes_[self].grad;
    gp->grad.col(0) += g.cwiseProduct(xhat);
    bp->grad.col(0) += g;
    if (!t.needs(x)) return;
    const Vec dxhat = g.cwiseProduct(gp->value.col(0));
    const double m1 = dxhat.sum() / n;
    const double m2 = dxhat.dot(xhat) / n;
    t.acc(x) += (inv_std * (dxhat.array() - m1 - xhat.array() * m2)).matrix();
  });
}

void Tape::backward(Var root) {
  const std::pair<Var, double> seed{root, 1.0};
  backward(std::span<const std::pair<Var, double>>(&seed, 1));
}

void Tape::backward(std::span<const std::pair<Var, double>> seeds) {
  if (!grad_enabled_) throw std::logic_error("Tape::backward on a tape recorded without gradients");
  std::size_t top = 0;
  for (auto& n : nodes_) n.grad.resize(0);
  for (const auto& [root, s] : seeds) {
    require(value(root).size() == 1, "Tape::backward: root must be scalar");
    acc(root)(0) += s;
    top = std::max(top, static_cast<std::size_t>(root.id) + 1);
  }
  for (std::size_t i = top; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || !n.backward || n.grad.size() == 0) continue;
    n.backward(*this, i);
  }
}

}  // namespace givenet
