#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rism/types.hpp"

namespace rism::grids {

// Fixed bilinear polar-to-Cartesian resampling map. For every Cartesian
// cell it stores four flat polar source indices and their weights; cells
// whose range exceeds the last bin are flagged out of range and read as 0.
// Azimuth interpolation wraps modulo the azimuth count.
struct PolarCartMap {
  int num_azimuths = 0;
  int num_range_bins = 0;
  int height = 0;
  int width = 0;
  std::vector<std::uint32_t> src;     // 4 per cell
  std::vector<float> weight;          // 4 per cell, sums to 1 where in range
  std::vector<std::uint8_t> in_range; // 1 per cell

  std::int64_t num_cells() const { return static_cast<std::int64_t>(height) * width; }
};

// Azimuth 0 lies along the grid +x axis, counter-clockwise positive; range
// bin r is centred at r * range_resolution. Throws std::invalid_argument on
// non-positive dimensions.
PolarCartMap build_polar_cart_map(int num_azimuths, int num_range_bins, float range_resolution, int height, int width,
                                  float cell_size);

// cart[cell] = bilinear combination of the four polar sources; 0 out of
// range. polar has map.num_azimuths * map.num_range_bins entries.
template <typename T>
void resample_polar_to_cart(const PolarCartMap& map, const T* polar, T* cart);

std::vector<float> resample_polar_to_cart(const PolarCartMap& map, const std::vector<float>& polar);

// Transpose of the forward map: each polar bin accumulates the weighted
// gradients of the Cartesian cells it feeds. Serial within one plane.
template <typename T>
void resample_backward_acc(const PolarCartMap& map, const T* grad_cart, T* grad_polar);

std::vector<float> resample_polar_to_cart_backward(const PolarCartMap& map, const std::vector<float>& grad_cart);

// Rotates a scan/label pair about the origin by angle_bins azimuth bins:
// the polar raster is cyclically shifted (exact) and the Cartesian labels
// are rotated by nearest-neighbour lookup about the grid centre. Cells that
// rotate in from outside the grid become unobserved.
std::pair<PolarScan, LabelSet> rotate_pair(const PolarScan& polar, const LabelSet& labels, int angle_bins);

extern template void resample_polar_to_cart<float>(const PolarCartMap&, const float*, float*);
extern template void resample_polar_to_cart<double>(const PolarCartMap&, const double*, double*);
extern template void resample_backward_acc<float>(const PolarCartMap&, const float*, float*);
extern template void resample_backward_acc<double>(const PolarCartMap&, const double*, double*);

}  // namespace rism::grids
