#pragma once

#include "givenet/counter.hpp"
#include "givenet/training.hpp"

#include <cstdint>

namespace givenet::testing {

/// Small counter trained just far enough to decode perfectly, then frozen.
Counter quick_counter(int length, int dim, std::uint64_t seed);

/// L = 12 environment with matching tiny agents, for fast trainer tests.
RunSettings tiny_settings(int counter_length, int counter_dim);

/// Two-armed bandit (arm 1 pays +1, arm 0 pays 0) trained with
/// reinforce_update on a softmax over two logits. Returns P(arm 1).
double bandit_better_arm_probability(std::uint64_t seed, int episodes, double lr);

}  // namespace givenet::testing
