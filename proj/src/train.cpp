#include "rism/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "rism/grids.hpp"
#include "rism/rng.hpp"

namespace rism::train {

namespace {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t id) {
  return mix64(master + 0x9e3779b97f4a7c15ULL * (id + 1));
}

// (B,1,theta,R) input tensor plus per-sample labels, optionally rotated.
struct Batch {
  nn::Tensor<float> input;
  std::vector<LabelSet> labels;
};

Batch assemble(std::span<const sim::Sample> samples, std::span<const int> indices, bool augment,
               std::uint64_t seed) {
  const PolarScan& first = samples[static_cast<std::size_t>(indices[0])].scan;
  const int theta = first.num_azimuths, bins = first.num_range_bins;
  Batch batch;
  batch.input = nn::Tensor<float>(static_cast<int>(indices.size()), 1, theta, bins);
  batch.labels.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const sim::Sample& s = samples[static_cast<std::size_t>(indices[i])];
    const float* power = s.scan.power.data();
    if (augment) {
      CounterRng rng = CounterRng::stream(seed, i);
      const int angle_bins = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(theta)));
      auto [scan, labels] = grids::rotate_pair(s.scan, s.labels, angle_bins);
      std::copy(scan.power.begin(), scan.power.end(),
                batch.input.val.begin() + static_cast<std::ptrdiff_t>(i * scan.power.size()));
      batch.labels[i] = std::move(labels);
      continue;
    }
    std::copy_n(power, static_cast<std::size_t>(theta) * bins,
                batch.input.val.begin() + static_cast<std::ptrdiff_t>(i) * theta * bins);
    batch.labels[i] = s.labels;
  }
  return batch;
}

vloss::LossTerms<float> batch_loss(nn::Network<float>& net, const Batch& batch, const vloss::LossConfig& loss_cfg,
                                   std::uint64_t seed, nn::Graph<float>* graph_out,
                                   nn::Network<float>::Head* head_out, std::vector<float>* dmu,
                                   std::vector<float>* dgamma) {
  nn::Graph<float> local;
  nn::Graph<float>& g = graph_out ? *graph_out : local;
  const auto head = net.forward(g, batch.input);
  if (head_out) *head_out = head;
  const auto& mu = g.value(head.mu);
  const auto& gamma = g.value(head.gamma);
  const int num = batch.input.batch();
  const std::size_t plane = mu.val.size() / static_cast<std::size_t>(num);

  if (dmu) {
    dmu->assign(mu.val.size(), 0.0f);
    dgamma->assign(gamma.val.size(), 0.0f);
  }
  vloss::LossTerms<float> mean;
  const float scale = 1.0f / static_cast<float>(num);
  for (int nidx = 0; nidx < num; ++nidx) {
    const std::size_t off = static_cast<std::size_t>(nidx) * plane;
    const std::span<const float> mu_n(mu.val.data() + off, plane);
    const std::span<const float> gamma_n(gamma.val.data() + off, plane);
    const std::uint64_t sample_seed = derive_seed(seed, static_cast<std::uint64_t>(nidx));
    vloss::LossTerms<float> terms;
    if (dmu) {
      terms = vloss::total_loss_grad<float>(mu_n, gamma_n, batch.labels[static_cast<std::size_t>(nidx)], loss_cfg,
                                            sample_seed, dmu->data() + off, dgamma->data() + off, scale);
    } else {
      terms = vloss::total_loss<float>(mu_n, gamma_n, batch.labels[static_cast<std::size_t>(nidx)], loss_cfg,
                                       sample_seed);
    }
    mean.total += terms.total * scale;
    mean.likelihood += terms.likelihood * scale;
    mean.kl += terms.kl * scale;
    mean.observed_cells += terms.observed_cells;
  }
  return mean;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (!(learning_rate > 0.0f)) throw std::invalid_argument("TrainConfig: learning_rate must be positive");
  loss.validate();
}

vloss::LossTerms<float> train_step(nn::Network<float>& net, nn::Adam<float>& opt,
                                   std::span<const sim::Sample> batch_samples, const TrainConfig& cfg,
                                   std::uint64_t step_seed, int* skipped) {
  std::vector<int> idx(batch_samples.size());
  std::iota(idx.begin(), idx.end(), 0);
  const Batch batch =
      assemble(batch_samples, idx, cfg.augment_rotations, derive_seed(step_seed, 0xa06));

  nn::Graph<float> g;
  nn::Network<float>::Head head;
  std::vector<float> dmu, dgamma;
  const auto terms = batch_loss(net, batch, cfg.loss, derive_seed(step_seed, 0x105), &g, &head, &dmu, &dgamma);
  if (!std::isfinite(terms.total))
    throw NumericError("train_step: non-finite loss (total=" + std::to_string(terms.total) + ")");
  g.backward({{head.mu, &dmu}, {head.gamma, &dgamma}});
  const int s = opt.step(net.parameters());
  if (skipped) *skipped = s;
  return terms;
}

vloss::LossTerms<float> evaluate_loss(nn::Network<float>& net, std::span<const sim::Sample> samples,
                                      const vloss::LossConfig& loss_cfg, std::uint64_t seed) {
  std::vector<int> idx(samples.size());
  std::iota(idx.begin(), idx.end(), 0);
  const Batch batch = assemble(samples, idx, false, 0);
  return batch_loss(net, batch, loss_cfg, seed, nullptr, nullptr, nullptr, nullptr);
}

TrainResult train(nn::Network<float>& net, std::span<const sim::Sample> samples, const TrainConfig& cfg,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.validate();
  if (samples.empty()) throw std::invalid_argument("train: empty dataset");

  nn::Adam<float> opt(cfg.learning_rate);
  const auto params = net.parameters();

  TrainResult result;
  result.best_loss = std::numeric_limits<double>::infinity();

  std::vector<int> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    CounterRng shuffle_rng = CounterRng::stream(cfg.seed, 0xe90c + static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng.uniform_int(i))]);
    }

    EpochLog log;
    log.epoch = epoch;
    int steps_in_epoch = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const std::span<const int> idx(order.data() + start, end - start);
      const Batch batch = assemble(samples, idx, cfg.augment_rotations,
                                   derive_seed(cfg.seed, 0xa06000 + step));

      nn::Graph<float> g;
      nn::Network<float>::Head head;
      std::vector<float> dmu, dgamma;
      const auto terms =
          batch_loss(net, batch, cfg.loss, derive_seed(cfg.seed, 0x105000 + step), &g, &head, &dmu, &dgamma);
      if (!std::isfinite(terms.total)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + " step " +
                           std::to_string(step));
      }
      g.backward({{head.mu, &dmu}, {head.gamma, &dgamma}});
      result.nonfinite_skips += opt.step(params);

      log.total += terms.total;
      log.likelihood += terms.likelihood;
      log.kl += terms.kl;
      ++steps_in_epoch;
      ++step;
    }
    log.total /= steps_in_epoch;
    log.likelihood /= steps_in_epoch;
    log.kl /= steps_in_epoch;
    result.log.push_back(log);
    if (log.total < result.best_loss) {
      result.best_loss = log.total;
      result.best_epoch = epoch;
      result.best_parameters = net.parameter_values();
    }
    if (on_epoch) on_epoch(log);
  }
  return result;
}

}  // namespace rism::train
