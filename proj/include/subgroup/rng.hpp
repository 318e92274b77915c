#pragma once

#include <cstdint>
#include <vector>

#include "subgroup/math.hpp"

namespace subgroup {

/// Seed for one reproducible stream. (seed, stream_id) fully determines
/// every draw; distinct stream_ids behave as independent streams.
struct RngSeed {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  RngSeed derive(std::uint64_t tag) const;
};

namespace detail {

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

inline RngSeed RngSeed::derive(std::uint64_t tag) const {
  return RngSeed{detail::mix64(seed ^ detail::mix64(tag)),
                 detail::mix64(stream_id + 0x632be59bd9b4e019ULL + tag)};
}

/// Counter-based generator: draw k of stream (seed, stream_id) is
/// mix64(mix64(seed ^ mix64(stream_id)) + k * golden_ratio). Stateless
/// apart from the counter, so streams are cross-platform stable and
/// trivially splittable.
class CounterRng {
 public:
  explicit CounterRng(RngSeed s)
      : base_(detail::mix64(s.seed ^ detail::mix64(s.stream_id ^ 0xda3e39cb94b95bdbULL))) {}

  std::uint64_t next_u64() {
    return detail::mix64(base_ + (counter_++) * 0x9e3779b97f4a7c15ULL);
  }

  /// Uniform draw in the open interval (0,1).
  double uniform() {
    // 53 random bits, shifted into (0,1); offset keeps 0 unreachable.
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via the inverse CDF, one uniform per draw.
  double normal() { return normal_quantile(uniform()); }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

/// Pre-drawn i.i.d. standard normals from a dedicated stream,
/// independent of any data stream by construction.
class NoiseStream {
 public:
  NoiseStream(RngSeed seed, std::size_t count) {
    CounterRng rng(seed);
    draws_.reserve(count);
    for (std::size_t i = 0; i < count; ++i) draws_.push_back(rng.normal());
  }

  std::size_t size() const { return draws_.size(); }
  double operator[](std::size_t i) const { return draws_[i]; }

 private:
  std::vector<double> draws_;
};

}  // namespace subgroup
