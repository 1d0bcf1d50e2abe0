#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace givenet {

/// Seeded pseudo-random stream. Identical seed and call sequence give
/// identical draws on every platform (mt19937_64 is fully specified and all
/// derived draws are computed here rather than via <random> distributions).
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform01();
  double uniform(double lo, double hi);
  /// Uniform integer on the closed range [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  /// k distinct indices from [0, n), in draw order.
  std::vector<int> sample_without_replacement(int n, int k);

  /// Independent child stream keyed by `stream_id`; does not advance this one.
  RngStream derive(std::uint64_t stream_id) const;

  std::string serialize() const;
  static RngStream deserialize(const std::string& text);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace givenet
