#include "givenet/tensor.hpp"

#include <cmath>

namespace givenet {

Vec softmax(const Vec& x) {
  if (x.size() == 0) return x;
  Vec e = (x.array() - x.maxCoeff()).exp();
  return e / e.sum();
}

Vec log_softmax(const Vec& x) {
  if (x.size() == 0) return x;
  const double m = x.maxCoeff();
  const double lse = m + std::log((x.array() - m).exp().sum());
  return x.array() - lse;
}

double cosine_similarity(const Vec& a, const Vec& b) {
  require(a.size() == b.size(), "cosine_similarity: length mismatch");
  return a.dot(b) / (a.norm() * b.norm() + kNormEps);
}

bool all_finite(const Vec& x) { return x.allFinite(); }
bool all_finite(const Mat& x) { return x.allFinite(); }

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace givenet
