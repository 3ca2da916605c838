#include "rism/labeler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rism::labeler {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Merge ranks; decode back to (occupancy, observability) at the end.
enum Rank : std::uint8_t { kRankUnobserved = 0, kRankPartial = 1, kRankFree = 2, kRankOccupied = 3 };

std::uint8_t rank_of(std::uint8_t occ, std::uint8_t obs) {
  if (obs == kObserved) return occ ? kRankOccupied : kRankFree;
  return obs == kPartiallyObserved ? kRankPartial : kRankUnobserved;
}

}  // namespace

RayLabels label_azimuth(const std::vector<float>& hits, float max_range, int num_cells, float cell_size) {
  if (num_cells <= 0 || cell_size <= 0.0f) throw std::invalid_argument("label_azimuth: bad ray geometry");
  for (std::size_t i = 1; i < hits.size(); ++i) {
    if (!(hits[i] > hits[i - 1])) throw std::invalid_argument("label_azimuth: hits must be strictly ascending");
  }
  (void)max_range;

  RayLabels out;
  out.occupancy.assign(static_cast<std::size_t>(num_cells), 0);
  if (hits.empty()) {
    out.observability.assign(static_cast<std::size_t>(num_cells), kPartiallyObserved);
    return out;
  }
  out.observability.assign(static_cast<std::size_t>(num_cells), kUnobserved);

  std::vector<int> bins;
  bins.reserve(hits.size());
  for (float r : hits) {
    const int b = std::min(static_cast<int>(r / cell_size), num_cells - 1);
    if (bins.empty() || b != bins.back()) bins.push_back(b);
  }
  const int first = bins.front(), last = bins.back();
  for (int b = 0; b < first; ++b) out.observability[static_cast<std::size_t>(b)] = kObserved;
  for (int b = first; b <= last; ++b) out.observability[static_cast<std::size_t>(b)] = kPartiallyObserved;
  for (int b : bins) {
    out.occupancy[static_cast<std::size_t>(b)] = 1;
    out.observability[static_cast<std::size_t>(b)] = kObserved;
  }
  return out;
}

LabelSet rasterize_labels(const LidarReturns& returns, const LabelGeometry& geometry) {
  const int h = geometry.height, w = geometry.width;
  const float s = geometry.cell_size;
  if (h <= 0 || w <= 0 || s <= 0.0f) throw std::invalid_argument("rasterize_labels: bad geometry");

  const int num_beams = returns.num_beams();
  const int ray_cells = static_cast<int>(std::ceil(0.5 * std::hypot(h, w))) + 2;

  std::vector<RayLabels> rays(static_cast<std::size_t>(num_beams));
#pragma omp parallel for schedule(static)
  for (int b = 0; b < num_beams; ++b) {
    rays[static_cast<std::size_t>(b)] = label_azimuth(returns.hits[static_cast<std::size_t>(b)], returns.max_range,
                                                      ray_cells, s);
  }

  std::vector<std::uint8_t> rank(static_cast<std::size_t>(h) * w, kRankUnobserved);
  const float t_max = static_cast<float>(ray_cells) * s;
  for (int b = 0; b < num_beams; ++b) {
    const double angle = b * kTwoPi / num_beams;
    const double dx = std::cos(angle), dy = std::sin(angle);
    const RayLabels& ray = rays[static_cast<std::size_t>(b)];
    for (float t = 0.0f; t < t_max; t += 0.5f * s) {
      const int u = static_cast<int>(std::floor(t * dy / s + h / 2.0));
      const int v = static_cast<int>(std::floor(t * dx / s + w / 2.0));
      if (u < 0 || u >= h || v < 0 || v >= w) break;
      const int bin = std::min(static_cast<int>(t / s), ray_cells - 1);
      const std::uint8_t r = rank_of(ray.occupancy[static_cast<std::size_t>(bin)],
                                     ray.observability[static_cast<std::size_t>(bin)]);
      std::uint8_t& cell = rank[static_cast<std::size_t>(u) * w + v];
      cell = std::max(cell, r);
    }
  }

  LabelSet labels;
  labels.height = h;
  labels.width = w;
  labels.occupancy.assign(rank.size(), 0);
  labels.observability.assign(rank.size(), kUnobserved);
  for (std::size_t i = 0; i < rank.size(); ++i) {
    switch (rank[i]) {
      case kRankOccupied:
        labels.occupancy[i] = 1;
        labels.observability[i] = kObserved;
        break;
      case kRankFree:
        labels.observability[i] = kObserved;
        break;
      case kRankPartial:
        labels.observability[i] = kPartiallyObserved;
        break;
      default:
        break;
    }
  }

  // Vehicle footprint at the sensor is never labelled.
  const float half_mask = 0.5f * geometry.center_mask_metres;
  if (half_mask > 0.0f) {
    for (int u = 0; u < h; ++u) {
      for (int v = 0; v < w; ++v) {
        const double x = (v + 0.5 - w / 2.0) * s;
        const double y = (u + 0.5 - h / 2.0) * s;
        if (std::abs(x) <= half_mask && std::abs(y) <= half_mask) {
          labels.occupancy[labels.index(u, v)] = 0;
          labels.observability[labels.index(u, v)] = kUnobserved;
        }
      }
    }
  }
  return labels;
}

}  // namespace rism::labeler
