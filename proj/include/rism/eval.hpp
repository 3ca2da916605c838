#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rism/simulator.hpp"
#include "rism/types.hpp"

namespace rism::eval {

// Pooled confusion counts over observed cells; the class-IoU protocol sums
// these across a whole split before forming ratios.
struct ConfusionCounts {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;

  // Accumulates prediction vs occupancy label over cells with o == 1.
  void accumulate(const std::uint8_t* pred, const LabelSet& labels);

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  std::int64_t total() const { return tp + fp + fn + tn; }
};

struct IouReport {
  std::string method;
  std::string config_digest;
  double iou_occupied = 0.0;
  double iou_free = 0.0;
  double mean_iou = 0.0;
  std::int64_t occupied_cells = 0;  // labelled occupied within the mask
  std::int64_t free_cells = 0;      // labelled free within the mask
};

// An empty union defines the class IoU as 1 (vacuous truth).
IouReport iou_from_counts(const ConfusionCounts& c, std::string method = "", std::string digest = "");

// Per-class and mean IoU of a binary mask against the occupancy labels,
// restricted to observed cells. Throws std::invalid_argument when no cell
// is observed.
IouReport iou(const std::vector<std::uint8_t>& pred, const LabelSet& labels, std::string method = "",
              std::string digest = "");

// A named predictor producing a Cartesian detection mask for a sample.
struct MethodEval {
  std::string name;
  std::string config_digest;
  std::function<std::vector<std::uint8_t>(const sim::Sample&)> predict;
};

// Runs every method over the test split, pooling confusion counts across
// samples, and returns one report per method in the given order.
std::vector<IouReport> compare_methods(std::span<const sim::Sample> test, const std::vector<MethodEval>& methods);

struct OmegaRow {
  float omega = 0.0f;
  double confident_unobserved_fraction = 0.0;  // |p - 0.5| > 0.25 among o == 0 cells
};

// Trains a model per omega via `train_and_predict`, which must return the
// per-sample probability grids over the test split, and reports how eagerly
// each model commits in unobserved space.
std::vector<OmegaRow> omega_sweep(
    const std::vector<float>& omegas,
    const std::function<std::vector<std::vector<float>>(float omega)>& train_and_predict,
    std::span<const sim::Sample> test);

struct OcclusionStat {
  std::optional<double> median_gamma_unobserved;
  std::optional<double> median_gamma_observed;
  std::optional<double> ratio;  // unobserved over observed
};

// Median predicted standard deviation over unobserved vs observed cells,
// pooled across the split. Absent medians (no cells of a class) are
// reported as empty rather than failing.
OcclusionStat occlusion_uncertainty_stat(std::span<const IsmOutput<float>> outputs,
                                         std::span<const sim::Sample> samples);

}  // namespace rism::eval
