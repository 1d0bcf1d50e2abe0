#pragma once

#include "givenet/parameter.hpp"
#include "givenet/rng.hpp"
#include "givenet/tape.hpp"

#include <functional>
#include <span>
#include <string>

namespace givenet {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  std::string worst;  // "<param>[index]: analytic vs numeric"
};

struct GradCheckOptions {
  double step = 1e-5;
  /// Coordinates sampled per parameter (all of them if the tensor is smaller).
  std::size_t coords_per_param = 24;
  /// Denominator floor: |a - n| / max(|a|, |n|, floor).
  double floor = 1e-5;
};

/// Compares the tape gradient of the scalar built by `loss` against central
/// finite differences at randomly sampled coordinates of every parameter.
/// Leaves parameter values untouched and gradients zeroed.
GradCheckResult grad_check(const std::function<Var(Tape&)>& loss, std::span<Parameter* const> params,
                           RngStream& rng, const GradCheckOptions& opts = {});

}  // namespace givenet
