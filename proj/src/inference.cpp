#include "rism/inference.hpp"

#include <cmath>
#include <stdexcept>

#include "rism/rng.hpp"

namespace rism::infer {

namespace {

constexpr double kPiOver8 = 0.39269908169872415481;

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

ProbabilityGrid grid_like(const IsmOutput<float>& out) {
  ProbabilityGrid g;
  g.height = out.height;
  g.width = out.width;
  g.p.resize(out.size());
  g.source_mu = out.mu;
  g.source_gamma = out.gamma;
  return g;
}

}  // namespace

ProbabilityGrid analytic_marginal(const IsmOutput<float>& out) {
  ProbabilityGrid g = grid_like(out);
  const std::int64_t n = static_cast<std::int64_t>(out.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const double gamma = out.gamma[static_cast<std::size_t>(i)];
    const double s = std::sqrt(1.0 + gamma * gamma * kPiOver8);
    g.p[static_cast<std::size_t>(i)] = static_cast<float>(sigmoid(out.mu[static_cast<std::size_t>(i)] / s));
  }
  return g;
}

ProbabilityGrid mc_marginal(const IsmOutput<float>& out, std::int64_t num_samples, std::uint64_t seed) {
  if (num_samples < 1) throw std::invalid_argument("mc_marginal: num_samples must be >= 1");
  ProbabilityGrid g = grid_like(out);
  const std::int64_t n = static_cast<std::int64_t>(out.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    CounterRng rng = CounterRng::stream(seed, static_cast<std::uint64_t>(i));
    const double mu = out.mu[static_cast<std::size_t>(i)];
    const double gamma = out.gamma[static_cast<std::size_t>(i)];
    double acc = 0.0;
    for (std::int64_t l = 0; l < num_samples; ++l) acc += sigmoid(mu + gamma * rng.normal());
    g.p[static_cast<std::size_t>(i)] = static_cast<float>(acc / static_cast<double>(num_samples));
  }
  return g;
}

std::vector<std::uint8_t> binarize(const ProbabilityGrid& grid, float tau_p) {
  if (!(tau_p > 0.0f && tau_p < 1.0f)) throw std::invalid_argument("binarize: tau_p must lie in (0,1)");
  std::vector<std::uint8_t> mask(grid.p.size(), 0);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(grid.p.size()); ++i) {
    mask[static_cast<std::size_t>(i)] = grid.p[static_cast<std::size_t>(i)] > tau_p ? 1 : 0;
  }
  return mask;
}

UncertaintySegmentation uncertainty_segment(const IsmOutput<float>& out, float gamma_max, float tau_p) {
  if (!(gamma_max > 0.0f)) throw std::invalid_argument("uncertainty_segment: gamma_max must be positive");
  const ProbabilityGrid probs = analytic_marginal(out);
  const std::vector<std::uint8_t> occupied = binarize(probs, tau_p);

  UncertaintySegmentation seg;
  seg.height = out.height;
  seg.width = out.width;
  seg.gamma_max = gamma_max;
  seg.tau_p = tau_p;
  seg.state.resize(out.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(out.size()); ++i) {
    const std::size_t c = static_cast<std::size_t>(i);
    seg.state[c] = out.gamma[c] > gamma_max ? TriState::kUnknown
                                            : (occupied[c] ? TriState::kOccupied : TriState::kFree);
  }
  return seg;
}

}  // namespace rism::infer
