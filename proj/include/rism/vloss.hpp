#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rism/types.hpp"

namespace rism::vloss {

struct LossConfig {
  float omega = 1.0f;        // likelihood importance
  float alpha = 0.5f;        // occupied-class weight in the cross entropy
  float prior_gamma = 1.0f;  // prior standard deviation on unobserved cells
  int num_samples = 25;      // reparameterisation samples L

  void validate() const;  // throws std::invalid_argument
};

// z^l = mu + gamma * eps^l with eps standard normal; deterministic in seed.
// Each cell consumes its own counter stream, so the values are independent
// of evaluation order and thread count.
template <typename T>
std::vector<std::vector<T>> reparam_samples(const IsmOutput<T>& out, int num_samples, std::uint64_t seed);

// Weighted binary cross entropy, numerically stable in logit form, summed
// over observed cells only: alpha * softplus(-z) on occupied cells,
// softplus(z) on free ones.
template <typename T>
T weighted_bce(std::span<const T> z, const LabelSet& labels, T alpha);

// Closed-form KL( N(mu, gamma^2) || N(0, prior_gamma^2) ) summed over
// unobserved cells.
template <typename T>
T kl_unobserved(std::span<const T> mu, std::span<const T> gamma, const LabelSet& labels, T prior_gamma);

template <typename T>
struct LossTerms {
  T total = T(0);
  T likelihood = T(0);  // (omega_bar / L) * sum_l H_alpha, observed cells
  T kl = T(0);          // KL sum, unobserved cells
  std::int64_t observed_cells = 0;
};

// The per-example training objective. omega_bar = omega * H * W / #observed
// is computed from this sample's own observed-cell count; with no observed
// cells the likelihood term is defined as 0 and only the KL term remains.
template <typename T>
LossTerms<T> total_loss(std::span<const T> mu, std::span<const T> gamma, const LabelSet& labels,
                        const LossConfig& cfg, std::uint64_t seed);

template <typename T>
LossTerms<T> total_loss(const IsmOutput<T>& out, const LabelSet& labels, const LossConfig& cfg, std::uint64_t seed);

// Fused value-and-gradient evaluation: adds scale * d(loss)/d(mu|gamma)
// into the provided buffers (same eps draws as total_loss for this seed).
template <typename T>
LossTerms<T> total_loss_grad(std::span<const T> mu, std::span<const T> gamma, const LabelSet& labels,
                             const LossConfig& cfg, std::uint64_t seed, T* dmu, T* dgamma, T scale);

}  // namespace rism::vloss
