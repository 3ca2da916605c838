#pragma once

#include <cstdint>
#include <functional>

#include "rism/labeler.hpp"
#include "rism/types.hpp"

namespace rism::sim {

struct RadarNoiseConfig {
  float speckle_mean_power = 0.08f;  // exponential mean of background power
  float return_gain = 1.0f;
  float attenuation_per_hit = 0.35f;  // power multiplier beyond each surface
  float saturation_prob = 0.02f;      // per azimuth
  float ghost_prob = 0.08f;           // per azimuth
  float noise_floor = 1e-4f;
  float phase_jitter_prob = 0.10f;    // one-bin azimuth jitter on true returns

  void validate() const;
};

struct LidarConfig {
  float max_range = 0.0f;    // metres; 0 derives a range from the scene, and
                             // it must never exceed the radar max range
  int num_beams = 0;         // 0 means one beam per radar azimuth
  float dropout_prob = 0.05f;

  void validate() const;
};

// Everything needed to synthesise one scan/label/world triple.
struct SimConfig {
  int num_azimuths = 64;
  int num_range_bins = 128;
  float range_resolution = 0.25f;
  int height = 128;
  int width = 128;
  float cell_size = 0.3f;
  int complexity = 3;
  float center_mask_metres = 2.0f;
  RadarNoiseConfig radar;
  LidarConfig lidar;

  // Fills the auto (zero) lidar range: a bit past the grid half-extent,
  // capped below the radar max range.
  void normalize();
  void validate() const;
};

// Procedural world: axis-aligned wall segments, rectangular vehicles and
// isolated scatterers, deterministic in the seed. The 3x3 block around the
// sensor stays free; for complexity >= 1 the occupied fraction is kept in
// [2%, 25%] by rejection-resampling.
WorldSpec generate_world(int height, int width, float cell_size, int complexity, std::uint64_t seed);

// First-return lidar: each beam without dropout reports the range of the
// first occupied cell along its ray, if within max_range.
labeler::LidarReturns render_lidar(const WorldSpec& world, const LidarConfig& cfg, int num_beams, std::uint64_t seed);

// Ray-marched radar render with speckle, attenuated second returns,
// saturation stripes, ghost returns and one-bin azimuth jitter.
PolarScan render_radar(const WorldSpec& world, const RadarNoiseConfig& cfg, int num_azimuths, int num_range_bins,
                       float range_resolution, std::uint64_t seed);

struct Sample {
  PolarScan scan;
  LabelSet labels;
  WorldSpec world;
};

Sample make_sample(const SimConfig& cfg, std::uint64_t master_seed, int sample_index);

// Generates n independent samples and hands each to `sink` in index order
// together with its train/test split assignment (last n/10 samples are
// test). Sample synthesis runs in parallel; delivery is ordered.
void make_dataset(const SimConfig& cfg, int n, std::uint64_t master_seed,
                  const std::function<void(int index, const Sample&, bool is_test)>& sink);

}  // namespace rism::sim
