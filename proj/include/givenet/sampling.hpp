#pragma once

#include "givenet/rng.hpp"
#include "givenet/tensor.hpp"

namespace givenet {

/// Index i with probability probs[i] (inverse CDF on one uniform draw).
int categorical_sample(const Vec& probs, RngStream& rng);

/// Lowest index among the maxima.
int argmax(const Vec& v);

}  // namespace givenet
