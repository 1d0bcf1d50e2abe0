#include "givenet/curve_fit.hpp"

#include "givenet/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace givenet {

std::string to_string(CurveFamily f) {
  switch (f) {
    case CurveFamily::linear: return "linear";
    case CurveFamily::exponential: return "exponential";
    case CurveFamily::logarithmic: return "logarithmic";
    case CurveFamily::sigmoidal: return "sigmoidal";
  }
  return "?";
}

int parameter_count(CurveFamily f) {
  switch (f) {
    case CurveFamily::linear: return 2;
    case CurveFamily::exponential: return 3;
    case CurveFamily::logarithmic: return 2;
    case CurveFamily::sigmoidal: return 4;
  }
  return 0;
}

std::string formula(CurveFamily f) {
  switch (f) {
    case CurveFamily::linear: return "a*N + b";
    case CurveFamily::exponential: return "a*exp(c*N) + b";
    case CurveFamily::logarithmic: return "a*ln(N) + b";
    case CurveFamily::sigmoidal: return "b + L/(1 + exp(-k*(N - N0)))";
  }
  return "?";
}

double evaluate_curve(CurveFamily f, std::span<const double> p, double x) {
  switch (f) {
    case CurveFamily::linear: return p[0] * x + p[1];
    case CurveFamily::exponential: return p[0] * std::exp(p[1] * x) + p[2];
    case CurveFamily::logarithmic: return p[0] * std::log(x) + p[1];
    case CurveFamily::sigmoidal: return p[0] + p[1] / (1.0 + std::exp(-p[2] * (x - p[3])));
  }
  return 0.0;
}

double bic(double rss, int m, int k) {
  const double md = static_cast<double>(m);
  return md * std::log(std::max(rss, kRssFloor) / md) + static_cast<double>(k) * std::log(md);
}

LmResult levenberg_marquardt(const ResidualFn& model, std::vector<double> p, std::size_t m, int max_iterations) {
  const auto n = static_cast<Eigen::Index>(p.size());
  const auto mi = static_cast<Eigen::Index>(m);
  std::vector<double> r(m), jac(m * p.size());
  auto rss_of = [&](std::span<const double> q) {
    model(q, r, jac);
    double s = 0.0;
    for (double v : r) s += v * v;
    return s;
  };
  LmResult res;
  double cost = rss_of(p);
  if (!std::isfinite(cost)) return res;
  double lambda = 1e-3;
  for (int it = 0; it < max_iterations; ++it) {
    res.iterations = it + 1;
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> J(jac.data(), mi, n);
    Eigen::Map<const Eigen::VectorXd> rv(r.data(), mi);
    const Eigen::MatrixXd JtJ = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * rv;
    if (g.lpNorm<Eigen::Infinity>() <= 1e-14 * std::max(1.0, cost)) {
      res.converged = true;
      break;
    }
    bool improved = false;
    for (int tries = 0; tries < 30; ++tries) {
      Eigen::MatrixXd A = JtJ;
      for (Eigen::Index i = 0; i < n; ++i) A(i, i) += lambda * std::max(JtJ(i, i), 1e-12);
      const Eigen::VectorXd step = A.ldlt().solve(-g);
      if (!step.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      std::vector<double> trial(p);
      for (Eigen::Index i = 0; i < n; ++i) trial[static_cast<std::size_t>(i)] += step(i);
      std::vector<double> r_saved = r, jac_saved = jac;
      const double c = rss_of(trial);
      if (std::isfinite(c) && c < cost) {
        const double rel = (cost - c) / std::max(cost, 1e-300);
        double step_rel = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
          step_rel = std::max(step_rel, std::abs(step(i)) / (std::abs(p[static_cast<std::size_t>(i)]) + 1e-12));
        p = std::move(trial);
        cost = c;
        lambda = std::max(lambda / 10.0, 1e-15);
        improved = true;
        if (rel < 1e-15 || step_rel < 1e-12 || cost <= kRssFloor * 1e-6) res.converged = true;
        break;
      }
      r = std::move(r_saved);
      jac = std::move(jac_saved);
      lambda *= 10.0;
    }
    if (!improved) {
      // No downhill step at any damping: a (local) minimum to working precision.
      res.converged = true;
      break;
    }
    if (res.converged) break;
  }
  res.params = p;
  res.rss = cost;
  return res;
}

namespace {

// Closed-form least squares for y ~ a*f(x) + b.
std::pair<double, double> linear_ls(std::span<const double> f, std::span<const double> y) {
  const auto m = static_cast<double>(f.size());
  double sf = 0, sy = 0, sff = 0, sfy = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    sf += f[i];
    sy += y[i];
    sff += f[i] * f[i];
    sfy += f[i] * y[i];
  }
  const double det = m * sff - sf * sf;
  if (std::abs(det) < 1e-300) return {0.0, sy / m};
  const double a = (m * sfy - sf * sy) / det;
  return {a, (sy - a * sf) / m};
}

double rss_of(CurveFamily fam, std::span<const double> p, std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = evaluate_curve(fam, p, x[i]) - y[i];
    s += d * d;
  }
  return s;
}

ResidualFn residuals(CurveFamily fam, std::span<const double> x, std::span<const double> y) {
  return [fam, x, y](std::span<const double> p, std::vector<double>& r, std::vector<double>& jac) {
    const std::size_t n = p.size();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double xi = x[i];
      r[i] = evaluate_curve(fam, p, xi) - y[i];
      double* J = &jac[i * n];
      if (fam == CurveFamily::exponential) {
        const double e = std::exp(p[1] * xi);
        J[0] = e;
        J[1] = p[0] * xi * e;
        J[2] = 1.0;
      } else {
        const double e = std::exp(-p[2] * (xi - p[3]));
        const double s = 1.0 / (1.0 + e);
        const double ds = s * (1.0 - s);  // d s / d(k (x - N0))
        J[0] = 1.0;
        J[1] = s;
        J[2] = p[1] * ds * (xi - p[3]);
        J[3] = -p[1] * ds * p[2];
      }
    }
  };
}

}  // namespace

FitResult fit_family(CurveFamily fam, std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "fit_family: x/y length mismatch");
  require(x.size() >= 5, "fit_family: at least five points are required");
  const int m = static_cast<int>(x.size());
  FitResult out;
  out.family = fam;

  if (fam == CurveFamily::linear || fam == CurveFamily::logarithmic) {
    std::vector<double> f(x.begin(), x.end());
    if (fam == CurveFamily::logarithmic) {
      for (double& v : f) {
        require(v > 0.0, "logarithmic fit needs positive N");
        v = std::log(v);
      }
    }
    const auto [a, b] = linear_ls(f, y);
    out.params = {a, b};
    out.rss = rss_of(fam, out.params, x, y);
    out.converged = std::isfinite(out.rss);
    out.bic = out.converged ? bic(out.rss, m, 2) : std::numeric_limits<double>::infinity();
    return out;
  }

  const auto [xmin_it, xmax_it] = std::minmax_element(x.begin(), x.end());
  const double xmin = *xmin_it, xmax = *xmax_it;
  const double span_x = std::max(xmax - xmin, 1e-9);
  const auto [ymin_it, ymax_it] = std::minmax_element(y.begin(), y.end());
  const double span_y = std::max(*ymax_it - *ymin_it, 1e-9);

  // Grid starts: 27 per family, with the linear parameters solved exactly
  // for each grid point of the nonlinear ones.
  std::vector<std::vector<double>> starts;
  if (fam == CurveFamily::exponential) {
    for (int i = 0; i < 27; ++i) {
      const double c = (-3.0 + 6.0 * i / 26.0) / span_x;
      if (std::abs(c) < 1e-9) continue;
      std::vector<double> f(x.size());
      for (std::size_t j = 0; j < x.size(); ++j) f[j] = std::exp(c * x[j]);
      const auto [a, b] = linear_ls(f, y);
      starts.push_back({a, c, b});
    }
  } else {
    const double ks[3] = {0.5 * 4.0 / span_x, 2.0 * 4.0 / span_x, 8.0 * 4.0 / span_x};
    for (double k : ks) {
      for (int i = 0; i < 9; ++i) {
        const double n0 = xmin + span_x * i / 8.0;
        std::vector<double> f(x.size());
        for (std::size_t j = 0; j < x.size(); ++j) f[j] = 1.0 / (1.0 + std::exp(-k * (x[j] - n0)));
        auto [L, b] = linear_ls(f, y);
        if (std::abs(L) < 1e-12) L = span_y;
        starts.push_back({b, L, k, n0});
      }
    }
  }

  const ResidualFn model = residuals(fam, x, y);
  bool any = false;
  for (const auto& s : starts) {
    const LmResult lm = levenberg_marquardt(model, s, x.size());
    if (!lm.converged || !std::isfinite(lm.rss) || lm.params.empty()) continue;
    bool finite = true;
    for (double v : lm.params) finite = finite && std::isfinite(v);
    if (!finite) continue;
    if (!any || lm.rss < out.rss) {
      out.params = lm.params;
      out.rss = lm.rss;
      any = true;
    }
  }
  out.converged = any;
  if (!any) {
    out.bic = std::numeric_limits<double>::infinity();
    out.rss = std::numeric_limits<double>::infinity();
    return out;
  }
  out.bic = bic(out.rss, m, parameter_count(fam));
  if (fam == CurveFamily::sigmoidal) out.inflection = out.params[3];
  return out;
}

std::vector<FitResult> fit_all(std::span<const double> x, std::span<const double> y) {
  std::vector<FitResult> out;
  for (CurveFamily f :
       {CurveFamily::linear, CurveFamily::exponential, CurveFamily::logarithmic, CurveFamily::sigmoidal})
    out.push_back(fit_family(f, x, y));
  return out;
}

const FitResult& best_fit(const std::vector<FitResult>& fits) {
  require(!fits.empty(), "best_fit: no fits");
  std::size_t best = 0;
  for (std::size_t i = 1; i < fits.size(); ++i)
    if (fits[i].bic < fits[best].bic) best = i;
  return fits[best];
}

}  // namespace givenet
