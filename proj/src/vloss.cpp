#include "rism/vloss.hpp"

#include <cmath>
#include <stdexcept>

#include "rism/rng.hpp"

namespace rism::vloss {

namespace {

template <typename T>
T softplus(T x) {
  if (x > T(20)) return x;
  if (x < T(-20)) return std::exp(x);
  return std::log1p(std::exp(x));
}

template <typename T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

// stable H_alpha at a single cell: alpha * softplus(-z) if occupied,
// softplus(z) if free
template <typename T>
T cell_bce(T z, bool occupied, T alpha) {
  return occupied ? alpha * softplus(-z) : softplus(z);
}

}  // namespace

void LossConfig::validate() const {
  if (!(omega > 0.0f)) throw std::invalid_argument("LossConfig: omega must be positive");
  if (!(alpha > 0.0f)) throw std::invalid_argument("LossConfig: alpha must be positive");
  if (!(prior_gamma > 0.0f)) throw std::invalid_argument("LossConfig: prior_gamma must be positive");
  if (num_samples < 1) throw std::invalid_argument("LossConfig: num_samples must be >= 1");
}

template <typename T>
std::vector<std::vector<T>> reparam_samples(const IsmOutput<T>& out, int num_samples, std::uint64_t seed) {
  if (num_samples < 1) throw std::invalid_argument("reparam_samples: num_samples must be >= 1");
  const std::size_t n = out.size();
  std::vector<std::vector<T>> samples(static_cast<std::size_t>(num_samples), std::vector<T>(n));
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
    CounterRng rng = CounterRng::stream(seed, static_cast<std::uint64_t>(i));
    for (int l = 0; l < num_samples; ++l) {
      samples[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)] =
          out.mu[static_cast<std::size_t>(i)] +
          out.gamma[static_cast<std::size_t>(i)] * static_cast<T>(rng.normal());
    }
  }
  return samples;
}

template <typename T>
T weighted_bce(std::span<const T> z, const LabelSet& labels, T alpha) {
  if (z.size() != labels.size()) throw std::invalid_argument("weighted_bce: shape mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (labels.observability[i] != kObserved) continue;
    sum += static_cast<double>(cell_bce(z[i], labels.occupancy[i] != 0, alpha));
  }
  return static_cast<T>(sum);
}

template <typename T>
T kl_unobserved(std::span<const T> mu, std::span<const T> gamma, const LabelSet& labels, T prior_gamma) {
  if (mu.size() != labels.size() || gamma.size() != labels.size())
    throw std::invalid_argument("kl_unobserved: shape mismatch");
  const double pg2 = static_cast<double>(prior_gamma) * prior_gamma;
  double sum = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (labels.observability[i] != kUnobserved) continue;
    const double g = gamma[i], m = mu[i];
    sum += std::log(prior_gamma / g) + (g * g + m * m) / (2.0 * pg2) - 0.5;
  }
  return static_cast<T>(sum);
}

template <typename T>
LossTerms<T> total_loss_grad(std::span<const T> mu, std::span<const T> gamma, const LabelSet& labels,
                             const LossConfig& cfg, std::uint64_t seed, T* dmu, T* dgamma, T scale) {
  cfg.validate();
  if (mu.size() != labels.size() || gamma.size() != labels.size())
    throw std::invalid_argument("total_loss: shape mismatch");
  const std::int64_t n = static_cast<std::int64_t>(labels.size());
  const int num_l = cfg.num_samples;

  std::int64_t observed = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) observed += labels.observability[i] == kObserved;
  const double omega_bar =
      observed > 0 ? static_cast<double>(cfg.omega) * static_cast<double>(n) / static_cast<double>(observed) : 0.0;
  const double like_w = omega_bar / num_l;
  const double pg2 = static_cast<double>(cfg.prior_gamma) * cfg.prior_gamma;
  const T alpha = static_cast<T>(cfg.alpha);

  // fixed-size blocks summed in order: reproducible for any thread count
  constexpr std::int64_t kBlock = 1024;
  const std::int64_t num_blocks = (n + kBlock - 1) / kBlock;
  std::vector<double> like_part(static_cast<std::size_t>(num_blocks), 0.0);
  std::vector<double> kl_part(static_cast<std::size_t>(num_blocks), 0.0);

#pragma omp parallel for schedule(static)
  for (std::int64_t blk = 0; blk < num_blocks; ++blk) {
    const std::int64_t lo = blk * kBlock;
    const std::int64_t hi = std::min(lo + kBlock, n);
    double like_sum = 0.0, kl_sum = 0.0;
    for (std::int64_t i = lo; i < hi; ++i) {
      const std::size_t c = static_cast<std::size_t>(i);
      const std::uint8_t obs = labels.observability[c];
      if (obs == kObserved) {
        const bool occ = labels.occupancy[c] != 0;
        const T w = occ ? alpha : T(1);
        CounterRng rng = CounterRng::stream(seed, static_cast<std::uint64_t>(i));
        double bce = 0.0, g_mu = 0.0, g_gamma = 0.0;
        for (int l = 0; l < num_l; ++l) {
          const T eps = static_cast<T>(rng.normal());
          const T z = mu[c] + gamma[c] * eps;
          bce += static_cast<double>(cell_bce(z, occ, alpha));
          if (dmu) {
            const double resid = static_cast<double>(w) * (static_cast<double>(sigmoid(z)) - (occ ? 1.0 : 0.0));
            g_mu += resid;
            g_gamma += resid * static_cast<double>(eps);
          }
        }
        like_sum += bce;
        if (dmu) {
          dmu[i] += scale * static_cast<T>(like_w * g_mu);
          dgamma[i] += scale * static_cast<T>(like_w * g_gamma);
        }
      } else if (obs == kUnobserved) {
        const double g = gamma[c], m = mu[c];
        kl_sum += std::log(static_cast<double>(cfg.prior_gamma) / g) + (g * g + m * m) / (2.0 * pg2) - 0.5;
        if (dmu) {
          dmu[i] += scale * static_cast<T>(m / pg2);
          dgamma[i] += scale * static_cast<T>(g / pg2 - 1.0 / g);
        }
      }
      // partially observed cells contribute nothing
    }
    like_part[static_cast<std::size_t>(blk)] = like_sum;
    kl_part[static_cast<std::size_t>(blk)] = kl_sum;
  }

  double like_total = 0.0, kl_total = 0.0;
  for (std::int64_t blk = 0; blk < num_blocks; ++blk) {
    like_total += like_part[static_cast<std::size_t>(blk)];
    kl_total += kl_part[static_cast<std::size_t>(blk)];
  }

  LossTerms<T> terms;
  terms.likelihood = static_cast<T>(like_w * like_total);
  terms.kl = static_cast<T>(kl_total);
  terms.total = terms.likelihood + terms.kl;
  terms.observed_cells = observed;
  return terms;
}

template <typename T>
LossTerms<T> total_loss(std::span<const T> mu, std::span<const T> gamma, const LabelSet& labels,
                        const LossConfig& cfg, std::uint64_t seed) {
  return total_loss_grad<T>(mu, gamma, labels, cfg, seed, nullptr, nullptr, T(0));
}

template <typename T>
LossTerms<T> total_loss(const IsmOutput<T>& out, const LabelSet& labels, const LossConfig& cfg, std::uint64_t seed) {
  return total_loss<T>(std::span<const T>(out.mu), std::span<const T>(out.gamma), labels, cfg, seed);
}

template std::vector<std::vector<float>> reparam_samples<float>(const IsmOutput<float>&, int, std::uint64_t);
template std::vector<std::vector<double>> reparam_samples<double>(const IsmOutput<double>&, int, std::uint64_t);
template float weighted_bce<float>(std::span<const float>, const LabelSet&, float);
template double weighted_bce<double>(std::span<const double>, const LabelSet&, double);
template float kl_unobserved<float>(std::span<const float>, std::span<const float>, const LabelSet&, float);
template double kl_unobserved<double>(std::span<const double>, std::span<const double>, const LabelSet&, double);
template LossTerms<float> total_loss<float>(std::span<const float>, std::span<const float>, const LabelSet&,
                                            const LossConfig&, std::uint64_t);
template LossTerms<double> total_loss<double>(std::span<const double>, std::span<const double>, const LabelSet&,
                                              const LossConfig&, std::uint64_t);
template LossTerms<float> total_loss<float>(const IsmOutput<float>&, const LabelSet&, const LossConfig&,
                                            std::uint64_t);
template LossTerms<double> total_loss<double>(const IsmOutput<double>&, const LabelSet&, const LossConfig&,
                                              std::uint64_t);
template LossTerms<float> total_loss_grad<float>(std::span<const float>, std::span<const float>, const LabelSet&,
                                                 const LossConfig&, std::uint64_t, float*, float*, float);
template LossTerms<double> total_loss_grad<double>(std::span<const double>, std::span<const double>, const LabelSet&,
                                                   const LossConfig&, std::uint64_t, double*, double*, double);

}  // namespace rism::vloss
