#pragma once

#include <vector>

#include "rism/types.hpp"

namespace rism::labeler {

// Lidar hit ranges per beam, strictly increasing within a beam. Beam b
// points along bearing b * 2*pi / beams.size().
struct LidarReturns {
  float max_range = 0.0f;
  std::vector<std::vector<float>> hits;  // metres, sorted ascending per beam

  int num_beams() const { return static_cast<int>(hits.size()); }
};

// Occupancy / observability labels along a single ray, one entry per cell
// of size cell_size starting at the sensor.
struct RayLabels {
  std::vector<std::uint8_t> occupancy;
  std::vector<std::uint8_t> observability;
};

// Applies the per-azimuth ray-tracing rules: cells holding a hit are
// occupied+observed, cells before the first hit are free+observed, cells
// between the first and last hit are partially observed, cells behind the
// last hit are unobserved, and a ray with no hits is partially observed
// throughout. Throws std::invalid_argument if hits are not strictly
// ascending.
RayLabels label_azimuth(const std::vector<float>& hits, float max_range, int num_cells, float cell_size);

struct LabelGeometry {
  int height = 0;
  int width = 0;
  float cell_size = 0.0f;
  float center_mask_metres = 2.0f;  // vehicle footprint forced unobserved
};

// Splats each beam's ray labels onto the Cartesian grid. Cells claimed by
// several beams resolve by priority occupied > free > partially observed >
// unobserved, which makes the merge independent of beam order. Cells
// touched by no ray stay unobserved.
LabelSet rasterize_labels(const LidarReturns& returns, const LabelGeometry& geometry);

}  // namespace rism::labeler
