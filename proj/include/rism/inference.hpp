#pragma once

#include <cstdint>
#include <vector>

#include "rism/types.hpp"

namespace rism::infer {

// Marginal occupancy probabilities; the source statistics are retained so
// downstream segmentation can threshold on gamma.
struct ProbabilityGrid {
  int height = 0;
  int width = 0;
  std::vector<float> p;
  std::vector<float> source_mu;
  std::vector<float> source_gamma;
};

enum class TriState : std::uint8_t { kFree = 0, kOccupied = 1, kUnknown = 2 };

struct UncertaintySegmentation {
  int height = 0;
  int width = 0;
  std::vector<TriState> state;
  float gamma_max = 0.0f;
  float tau_p = 0.5f;
};

// Probit-matched closed form: p = sigmoid(mu / sqrt(1 + gamma^2 * pi/8)).
ProbabilityGrid analytic_marginal(const IsmOutput<float>& out);

// Monte-Carlo reference estimator p = (1/L) sum_l sigmoid(mu + gamma*eps),
// deterministic in seed; per-cell counter streams keep it thread-safe.
ProbabilityGrid mc_marginal(const IsmOutput<float>& out, std::int64_t num_samples, std::uint64_t seed);

// p > tau_p is occupied; exactly tau_p counts as free.
std::vector<std::uint8_t> binarize(const ProbabilityGrid& grid, float tau_p = 0.5f);

// Cells with gamma <= gamma_max classify through the analytic marginal;
// cells above the threshold are unknown.
UncertaintySegmentation uncertainty_segment(const IsmOutput<float>& out, float gamma_max, float tau_p = 0.5f);

}  // namespace rism::infer
