#include "rism/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rism::eval {

void ConfusionCounts::accumulate(const std::uint8_t* pred, const LabelSet& labels) {
  const std::size_t n = labels.size();
  std::int64_t dtp = 0, dfp = 0, dfn = 0, dtn = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels.observability[i] != kObserved) continue;
    const bool truth = labels.occupancy[i] != 0;
    const bool hit = pred[i] != 0;
    dtp += truth && hit;
    dfp += !truth && hit;
    dfn += truth && !hit;
    dtn += !truth && !hit;
  }
  tp += dtp;
  fp += dfp;
  fn += dfn;
  tn += dtn;
}

IouReport iou_from_counts(const ConfusionCounts& c, std::string method, std::string digest) {
  IouReport r;
  r.method = std::move(method);
  r.config_digest = std::move(digest);
  const std::int64_t occ_union = c.tp + c.fp + c.fn;
  const std::int64_t free_union = c.tn + c.fn + c.fp;
  r.iou_occupied = occ_union == 0 ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(occ_union);
  r.iou_free = free_union == 0 ? 1.0 : static_cast<double>(c.tn) / static_cast<double>(free_union);
  r.mean_iou = 0.5 * (r.iou_occupied + r.iou_free);
  r.occupied_cells = c.tp + c.fn;
  r.free_cells = c.tn + c.fp;
  return r;
}

IouReport iou(const std::vector<std::uint8_t>& pred, const LabelSet& labels, std::string method, std::string digest) {
  if (pred.size() != labels.size()) throw std::invalid_argument("iou: shape mismatch");
  ConfusionCounts c;
  c.accumulate(pred.data(), labels);
  if (c.total() == 0) throw std::invalid_argument("iou: mask is empty (no observed cells)");
  return iou_from_counts(c, std::move(method), std::move(digest));
}

std::vector<IouReport> compare_methods(std::span<const sim::Sample> test, const std::vector<MethodEval>& methods) {
  if (test.empty()) throw std::invalid_argument("compare_methods: empty test split");
  std::vector<IouReport> reports;
  reports.reserve(methods.size());
  for (const MethodEval& m : methods) {
    if (!m.predict) throw std::invalid_argument("compare_methods: method '" + m.name + "' has no predictor");
    ConfusionCounts counts;
    for (const sim::Sample& sample : test) {
      const std::vector<std::uint8_t> mask = m.predict(sample);
      counts.accumulate(mask.data(), sample.labels);
    }
    reports.push_back(iou_from_counts(counts, m.name, m.config_digest));
  }
  return reports;
}

std::vector<OmegaRow> omega_sweep(
    const std::vector<float>& omegas,
    const std::function<std::vector<std::vector<float>>(float omega)>& train_and_predict,
    std::span<const sim::Sample> test) {
  if (omegas.empty()) throw std::invalid_argument("omega_sweep: need at least one omega");
  std::vector<OmegaRow> rows;
  for (float omega : omegas) {
    const std::vector<std::vector<float>> probs = train_and_predict(omega);
    if (probs.size() != test.size()) throw std::invalid_argument("omega_sweep: predictor returned wrong sample count");
    std::int64_t confident = 0, total = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      const LabelSet& labels = test[i].labels;
      for (std::size_t c = 0; c < labels.size(); ++c) {
        if (labels.observability[c] != kUnobserved) continue;
        ++total;
        confident += std::abs(probs[i][c] - 0.5f) > 0.25f;
      }
    }
    rows.push_back({omega, total == 0 ? 0.0 : static_cast<double>(confident) / static_cast<double>(total)});
  }
  return rows;
}

namespace {

std::optional<double> median(std::vector<float>& v) {
  if (v.empty()) return std::nullopt;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    const auto lower = std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    m = 0.5 * (m + *lower);
  }
  return m;
}

}  // namespace

OcclusionStat occlusion_uncertainty_stat(std::span<const IsmOutput<float>> outputs,
                                         std::span<const sim::Sample> samples) {
  if (outputs.size() != samples.size()) throw std::invalid_argument("occlusion_uncertainty_stat: size mismatch");
  std::vector<float> unobserved, observed;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const LabelSet& labels = samples[i].labels;
    for (std::size_t c = 0; c < labels.size(); ++c) {
      if (labels.observability[c] == kUnobserved) {
        unobserved.push_back(outputs[i].gamma[c]);
      } else if (labels.observability[c] == kObserved) {
        observed.push_back(outputs[i].gamma[c]);
      }
    }
  }
  OcclusionStat stat;
  stat.median_gamma_unobserved = median(unobserved);
  stat.median_gamma_observed = median(observed);
  if (stat.median_gamma_unobserved && stat.median_gamma_observed && *stat.median_gamma_observed > 0.0) {
    stat.ratio = *stat.median_gamma_unobserved / *stat.median_gamma_observed;
  }
  return stat;
}

}  // namespace rism::eval
