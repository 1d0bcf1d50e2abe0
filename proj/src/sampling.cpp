#include "givenet/sampling.hpp"

namespace givenet {

int categorical_sample(const Vec& probs, RngStream& rng) {
  require(probs.size() > 0, "categorical_sample: empty distribution");
  if (!probs.allFinite() || (probs.array() < 0.0).any()) throw NumericError("categorical_sample: invalid probabilities");
  const double total = probs.sum();
  if (!(total > 0.0)) throw NumericError("categorical_sample: distribution sums to zero");
  const double u = rng.uniform01() * total;
  double acc = 0.0;
  int last_positive = 0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    if (probs(i) <= 0.0) continue;
    last_positive = static_cast<int>(i);
    acc += probs(i);
    if (u < acc) return static_cast<int>(i);
  }
  return last_positive;
}

int argmax(const Vec& v) {
  require(v.size() > 0, "argmax: empty vector");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return static_cast<int>(best);
}

}  // namespace givenet
