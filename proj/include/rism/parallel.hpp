#pragma once

#include <cstdint>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rism::par {

// Applies the RISM_THREADS cap if the environment variable is set.
void set_threads_from_env();

int max_threads();

// Sum of f(i) for i in [0, n). The index space is cut into fixed-size blocks
// summed independently and combined in block order, so the result is
// bit-identical for any thread count.
template <typename T, typename F>
T block_sum(std::int64_t n, F&& f) {
  constexpr std::int64_t kBlock = 4096;
  const std::int64_t num_blocks = (n + kBlock - 1) / kBlock;
  std::vector<T> partial(static_cast<std::size_t>(num_blocks), T(0));
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < num_blocks; ++b) {
    const std::int64_t lo = b * kBlock;
    const std::int64_t hi = lo + kBlock < n ? lo + kBlock : n;
    T s = T(0);
    for (std::int64_t i = lo; i < hi; ++i) s += f(i);
    partial[static_cast<std::size_t>(b)] = s;
  }
  T total = T(0);
  for (const T& s : partial) total += s;
  return total;
}

}  // namespace rism::par
