#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rism/nn.hpp"
#include "rism/simulator.hpp"
#include "rism/vloss.hpp"

namespace rism::train {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 8;
  float learning_rate = 1e-3f;
  vloss::LossConfig loss;
  std::uint64_t seed = 1;
  bool augment_rotations = true;  // random whole-bin rotation of each pair

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double total = 0.0;
  double likelihood = 0.0;
  double kl = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  double best_loss = 0.0;
  int best_epoch = 0;
  std::vector<std::vector<float>> best_parameters;
  int nonfinite_skips = 0;
};

// Minimises the variational objective with ADAM over shuffled minibatches.
// Deterministic in (network init, samples, config seed) for a fixed thread
// count. Throws NumericError if the loss turns non-finite.
TrainResult train(nn::Network<float>& net, std::span<const sim::Sample> samples, const TrainConfig& cfg,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

// One gradient step over the given batch; returns the batch-mean loss
// terms. Exposed for step-level tests.
vloss::LossTerms<float> train_step(nn::Network<float>& net, nn::Adam<float>& opt,
                                   std::span<const sim::Sample> batch, const TrainConfig& cfg, std::uint64_t step_seed,
                                   int* skipped = nullptr);

// Batch-mean loss at the current parameters without touching them.
vloss::LossTerms<float> evaluate_loss(nn::Network<float>& net, std::span<const sim::Sample> samples,
                                      const vloss::LossConfig& loss_cfg, std::uint64_t seed);

}  // namespace rism::train
