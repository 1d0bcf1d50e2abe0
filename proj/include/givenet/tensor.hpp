#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace givenet {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Raised when shapes or settings are inconsistent. Never recovered from.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a NaN/Inf shows up where finite values are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kNormEps = 1e-8;

/// exp(x_i - max x) / sum_j exp(x_j - max x)
Vec softmax(const Vec& x);
Vec log_softmax(const Vec& x);

/// a.b / (|a||b| + 1e-8)
double cosine_similarity(const Vec& a, const Vec& b);

bool all_finite(const Vec& x);
bool all_finite(const Mat& x);

void require(bool ok, const std::string& what);

}  // namespace givenet
