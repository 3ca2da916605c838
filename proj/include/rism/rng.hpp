#pragma once

#include <cmath>
#include <cstdint>

namespace rism {

// Murmur3-style 64-bit finaliser: bijective, avalanching.
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 33;
  z *= 0xff51afd7ed558ccdULL;
  z ^= z >> 33;
  z *= 0xc4ceb9fe1a85ec53ULL;
  z ^= z >> 33;
  return z;
}

// Counter-based generator in the splitmix64 family. The n-th output is a
// pure function of (key, n), so independent streams can be carved out of a
// single master seed and consumed in parallel without shared state.
class CounterRng {
 public:
  CounterRng() = default;
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  // Stream `stream_id` of `master_seed`; streams are statistically
  // independent for distinct ids.
  static CounterRng stream(std::uint64_t master_seed, std::uint64_t stream_id) {
    return CounterRng(mix64(master_seed + 0x9e3779b97f4a7c15ULL * (stream_id + 1)));
  }
  CounterRng substream(std::uint64_t stream_id) const {
    return CounterRng::stream(key_, stream_id);
  }

  std::uint64_t next_u64() {
    return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller (two uniforms per draw, no caching, so
  // the consumed counter count is fixed).
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // Exponential with the given mean (mean 0 degenerates to the constant 0).
  double exponential(double mean) { return -mean * std::log1p(-uniform()); }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace rism
