#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rism/grids.hpp"
#include "rism/simulator.hpp"
#include "rism/types.hpp"

namespace rism::cfar {

struct CfarConfig {
  int num_train_cells = 8;  // per side (1D) or ring width (2D)
  int num_guard_cells = 2;  // per side (1D) or guard half-width (2D)
  float prob_false_alarm = 1e-2f;

  void validate() const;
  std::string digest() const;
};

// Cell-averaging CFAR along a 1D signal. The noise level at each cell is
// the mean of the training cells flanking the guard cells; detection fires
// when power exceeds alpha * noise with the exponential-noise threshold
// factor alpha = N_t (Pfa^(-1/N_t) - 1). Edge windows are clipped and N_t
// renormalised. Throws std::invalid_argument if the window does not fit.
std::vector<std::uint8_t> ca_cfar_1d(std::span<const float> signal, const CfarConfig& cfg);

// Same detector per azimuth row of a polar scan.
std::vector<std::uint8_t> ca_cfar_polar(const PolarScan& scan, const CfarConfig& cfg);

// 2D variant: square training ring of width num_train_cells outside a
// square guard ring of half-width num_guard_cells.
std::vector<std::uint8_t> ca_cfar_2d(std::span<const float> grid, int height, int width, const CfarConfig& cfg);

std::vector<std::uint8_t> static_threshold(std::span<const float> values, float tau);

// Nearest polar bin per Cartesian cell (-1 beyond the last range bin), for
// carrying binary polar masks into the Cartesian frame without blending.
std::vector<std::int32_t> build_nearest_polar_lookup(int num_azimuths, int num_range_bins, float range_resolution,
                                                     int height, int width, float cell_size);

std::vector<std::uint8_t> polar_mask_to_cart(const std::vector<std::uint8_t>& polar_mask,
                                             const std::vector<std::int32_t>& lookup);

enum class Method { kCfar1dPolar, kCfar2dCartesian, kStaticThreshold };

const char* method_name(Method m);

struct TuneResult {
  Method method = Method::kCfar1dPolar;
  CfarConfig config;   // CFAR methods
  float tau = 0.0f;    // static threshold
  double mean_iou = 0.0;

  std::string digest() const;
};

// Exhaustive grid search maximising pooled mean IoU over the training
// samples; ties resolve to the smaller window, then the smaller Pfa
// (smaller tau for static thresholding). Throws std::invalid_argument on an
// empty search grid or dataset.
TuneResult tune(Method method, std::span<const sim::Sample> train, const grids::PolarCartMap& map,
                const std::vector<CfarConfig>& cfar_grid, const std::vector<float>& tau_grid);

// Applies a tuned method to one sample, producing a Cartesian mask.
std::vector<std::uint8_t> detect(const TuneResult& tuned, const sim::Sample& sample, const grids::PolarCartMap& map,
                                 const std::vector<std::int32_t>& nearest_lookup);

// Default search grids used by the CLI.
std::vector<CfarConfig> default_cfar_grid();
std::vector<float> default_tau_grid(std::span<const sim::Sample> train, const grids::PolarCartMap& map);

}  // namespace rism::cfar
