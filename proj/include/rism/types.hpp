#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rism {

// Failures attributable to on-disk data or missing artifacts (CLI exit code 3).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numeric breakdown during computation, e.g. a NaN loss (CLI exit code 4).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// API misuse, e.g. backward without a recorded forward pass.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Observability states of a grid cell.
inline constexpr std::uint8_t kUnobserved = 0;
inline constexpr std::uint8_t kObserved = 1;
inline constexpr std::uint8_t kPartiallyObserved = 2;

// One full rotation of radar power returns: num_azimuths rows of
// num_range_bins samples, row-major. Azimuth index a points along bearing
// a * 2*pi / num_azimuths, counter-clockwise from the grid +x axis; range
// bin r is centred at r * range_resolution metres.
struct PolarScan {
  int num_azimuths = 0;
  int num_range_bins = 0;
  float range_resolution = 0.0f;  // metres per bin
  std::vector<float> power;       // num_azimuths x num_range_bins

  float& at(int azimuth, int range_bin) {
    return power[static_cast<std::size_t>(azimuth) * num_range_bins + range_bin];
  }
  float at(int azimuth, int range_bin) const {
    return power[static_cast<std::size_t>(azimuth) * num_range_bins + range_bin];
  }
  float max_range() const { return num_range_bins * range_resolution; }

  // Throws std::invalid_argument when the scan violates its invariants.
  void validate() const;
};

// A square world raster with the sensor fixed at the grid centre. Cell
// (u, v) is centred at physical ((v + 0.5 - W/2) * cell_size,
// (u + 0.5 - H/2) * cell_size); bearings are measured by atan2(y, x).
struct CartesianGrid {
  int height = 0;
  int width = 0;
  float cell_size = 0.0f;  // metres
  std::vector<float> values;

  float& at(int u, int v) { return values[static_cast<std::size_t>(u) * width + v]; }
  float at(int u, int v) const { return values[static_cast<std::size_t>(u) * width + v]; }

  void validate() const;
};

// Partial occupancy labels: occupancy is meaningful only where
// observability == kObserved.
struct LabelSet {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> occupancy;      // {0,1}
  std::vector<std::uint8_t> observability;  // {0,1,2}

  std::size_t index(int u, int v) const { return static_cast<std::size_t>(u) * width + v; }
  std::size_t size() const { return occupancy.size(); }

  void validate() const;
};

// Ground-truth synthetic scene. Kept out of training; the simulator renders
// scans from it and evaluation may refer back to it.
struct WorldSpec {
  int height = 0;
  int width = 0;
  float cell_size = 0.0f;
  std::vector<std::uint8_t> occupancy_truth;  // {0,1}
  std::vector<float> reflectivity;            // in [0,1], zero on free cells
  std::uint64_t rng_seed = 0;

  bool occupied(int u, int v) const {
    return occupancy_truth[static_cast<std::size_t>(u) * width + v] != 0;
  }
  void validate() const;
};

// Per-cell predicted logit mean and standard deviation of the latent
// occupancy score. gamma is strictly positive.
template <typename T = float>
struct IsmOutput {
  int height = 0;
  int width = 0;
  std::vector<T> mu;
  std::vector<T> gamma;

  std::size_t size() const { return mu.size(); }
};

}  // namespace rism
