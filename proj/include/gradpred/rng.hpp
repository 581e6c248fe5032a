#pragma once

#include <cstdint>
#include <string_view>

namespace gradpred {

// xoshiro256++ seeded through splitmix64. Fully specified here so that
// streams are identical on every platform, unlike the std distributions.
class Xoshiro256 {
 public:
  explicit Xoshiro256(std::uint64_t seed) { reseed(seed); }

  void reseed(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform in [0,1): 53 mantissa bits of one draw.
  double next_double();

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Unbiased integer in [0, n) via rejection.
  std::uint64_t next_index(std::uint64_t n);

  // Box-Muller; one value per call, the pair's second half is cached.
  double normal(double mean = 0.0, double stddev = 1.0);

 private:
  std::uint64_t state_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Stable derivation of independent sub-streams from one run seed, so e.g.
// model init, predictor init and data generation never share a stream.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream_name);

}  // namespace gradpred
