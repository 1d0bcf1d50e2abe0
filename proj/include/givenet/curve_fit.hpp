#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace givenet {

enum class CurveFamily { linear, exponential, logarithmic, sigmoidal };

std::string to_string(CurveFamily f);
/// 2, 3, 2, 4.
int parameter_count(CurveFamily f);
/// Human-readable form of the family, e.g. "a*N + b".
std::string formula(CurveFamily f);

/// Parameter order per family:
///   linear       a*N + b                          {a, b}
///   exponential  a*exp(c*N) + b                   {a, c, b}
///   logarithmic  a*ln(N) + b                      {a, b}
///   sigmoidal    b + L / (1 + exp(-k*(N - N0)))   {b, L, k, N0}
double evaluate_curve(CurveFamily f, std::span<const double> params, double x);

struct FitResult {
  CurveFamily family = CurveFamily::linear;
  std::vector<double> params;
  double rss = 0.0;
  double bic = 0.0;
  bool converged = false;
  std::optional<double> inflection;  // N0, sigmoidal only

  int num_params() const { return parameter_count(family); }
};

inline constexpr double kRssFloor = 1e-12;

/// m*ln(max(RSS, 1e-12)/m) + k*ln(m).
double bic(double rss, int num_points, int num_params);

/// Least-squares fit of one family. Nonlinear families run Levenberg-Marquardt
/// from a grid of 27 starts; a family that never converges gets infinite BIC.
FitResult fit_family(CurveFamily f, std::span<const double> x, std::span<const double> y);

/// All four families, in enum order.
std::vector<FitResult> fit_all(std::span<const double> x, std::span<const double> y);

/// Lowest BIC; ties go to the earlier family (fewer parameters first in enum order).
const FitResult& best_fit(const std::vector<FitResult>& fits);

struct LmResult {
  std::vector<double> params;
  double rss = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Levenberg-Marquardt with Marquardt diagonal scaling. `model` fills the
/// residual vector r(p) (length m) and Jacobian dr/dp (m x n, row-major).
using ResidualFn = std::function<void(std::span<const double> p, std::vector<double>& r, std::vector<double>& jac)>;
LmResult levenberg_marquardt(const ResidualFn& model, std::vector<double> start, std::size_t num_residuals,
                             int max_iterations = 500);

}  // namespace givenet
