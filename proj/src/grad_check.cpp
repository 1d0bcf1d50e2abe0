#include "givenet/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace givenet {

GradCheckResult grad_check(const std::function<Var(Tape&)>& loss, std::span<Parameter* const> params,
                           RngStream& rng, const GradCheckOptions& opts) {
  zero_grads(params);
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  std::vector<Mat> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) analytic.push_back(p->grad);
  zero_grads(params);

  auto eval = [&]() {
    Tape tape(false);
    return tape.scalar(loss(tape));
  };

  GradCheckResult res;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    const auto n = static_cast<std::size_t>(p.size());
    if (n == 0) continue;
    std::vector<int> idx;
    if (n <= opts.coords_per_param) {
      for (std::size_t i = 0; i < n; ++i) idx.push_back(static_cast<int>(i));
    } else {
      idx = rng.sample_without_replacement(static_cast<int>(n), static_cast<int>(opts.coords_per_param));
    }
    for (int i : idx) {
      double& x = p.value.data()[i];
      const double saved = x;
      x = saved + opts.step;
      const double fp = eval();
      x = saved - opts.step;
      const double fm = eval();
      x = saved;
      const double numeric = (fp - fm) / (2.0 * opts.step);
      const double a = analytic[pi].data()[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), opts.floor});
      ++res.coordinates;
      if (rel > res.max_relative_error || !std::isfinite(rel)) {
        res.max_relative_error = std::isfinite(rel) ? rel : INFINITY;
        std::ostringstream os;
        os << p.name << '[' << i << "]: analytic " << a << " vs numeric " << numeric;
        res.worst = os.str();
      }
    }
  }
  return res;
}

}  // namespace givenet
