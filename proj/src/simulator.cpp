#include "rism/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "rism/rng.hpp"

namespace rism::sim {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void require_prob(float p, const char* what) {
  if (!(p >= 0.0f && p <= 1.0f)) throw std::invalid_argument(std::string(what) + " must lie in [0,1]");
}

struct WorldDraft {
  int h, w;
  std::vector<std::uint8_t> occ;

  bool in_center_block(int u, int v) const {
    return std::abs(u - h / 2) <= 1 && std::abs(v - w / 2) <= 1;
  }
  void set(int u, int v) {
    if (u < 0 || u >= h || v < 0 || v >= w || in_center_block(u, v)) return;
    occ[static_cast<std::size_t>(u) * w + v] = 1;
  }
};

void draw_features(WorldDraft& d, int complexity, CounterRng& rng) {
  const int h = d.h, w = d.w;
  // axis-aligned wall segments, one cell thick
  const int num_walls = 2 * complexity;
  for (int i = 0; i < num_walls; ++i) {
    const bool horizontal = rng.bernoulli(0.5);
    const int len = 3 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(std::max(3, (h + w) / 5))));
    const int u0 = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(h)));
    const int v0 = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(w)));
    for (int k = 0; k < len; ++k) d.set(horizontal ? u0 : u0 + k, horizontal ? v0 + k : v0);
  }
  // rectangular vehicles
  const int num_vehicles = complexity;
  for (int i = 0; i < num_vehicles; ++i) {
    const int du = 2 + static_cast<int>(rng.uniform_int(3));
    const int dv = 3 + static_cast<int>(rng.uniform_int(4));
    const int u0 = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(h)));
    const int v0 = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(w)));
    for (int u = u0; u < u0 + du; ++u) {
      for (int v = v0; v < v0 + dv; ++v) d.set(u, v);
    }
  }
  // isolated point scatterers
  const int num_points = 3 * complexity;
  for (int i = 0; i < num_points; ++i) {
    d.set(static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(h))),
          static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(w))));
  }
}

}  // namespace

void RadarNoiseConfig::validate() const {
  require_prob(saturation_prob, "saturation_prob");
  require_prob(ghost_prob, "ghost_prob");
  require_prob(phase_jitter_prob, "phase_jitter_prob");
  if (!(attenuation_per_hit >= 0.0f && attenuation_per_hit < 1.0f))
    throw std::invalid_argument("attenuation_per_hit must lie in [0,1)");
  if (return_gain <= 0.0f) throw std::invalid_argument("return_gain must be positive");
  if (speckle_mean_power < 0.0f || noise_floor < 0.0f)
    throw std::invalid_argument("powers must be non-negative");
}

void LidarConfig::validate() const {
  require_prob(dropout_prob, "dropout_prob");
  if (max_range <= 0.0f) throw std::invalid_argument("lidar max_range must be positive");
}

void SimConfig::normalize() {
  if (lidar.max_range == 0.0f) {
    const float radar_max = num_range_bins * range_resolution;
    const float half_extent = 0.5f * cell_size * static_cast<float>(std::min(height, width));
    lidar.max_range = std::min(0.85f * radar_max, 1.25f * half_extent);
  }
}

void SimConfig::validate() const {
  if (height < 16 || width < 16) throw std::invalid_argument("grid too small (min 16x16)");
  if (num_azimuths < 4 || num_range_bins < 4) throw std::invalid_argument("scan too small (min 4x4)");
  if (cell_size <= 0.0f || range_resolution <= 0.0f) throw std::invalid_argument("resolutions must be positive");
  radar.validate();
  lidar.validate();
  if (lidar.max_range > num_range_bins * range_resolution)
    throw std::invalid_argument("lidar max_range exceeds radar max range");
}

WorldSpec generate_world(int height, int width, float cell_size, int complexity, std::uint64_t seed) {
  if (height < 16 || width < 16) throw std::invalid_argument("generate_world: grid too small (min 16x16)");
  if (complexity < 0) throw std::invalid_argument("generate_world: complexity must be non-negative");

  WorldSpec world;
  world.height = height;
  world.width = width;
  world.cell_size = cell_size;
  world.rng_seed = seed;
  world.occupancy_truth.assign(static_cast<std::size_t>(height) * width, 0);
  world.reflectivity.assign(world.occupancy_truth.size(), 0.0f);
  if (complexity == 0) return world;

  const double lo = 0.02, hi = 0.25;
  for (int attempt = 0; attempt < 100; ++attempt) {
    CounterRng rng = CounterRng::stream(seed, static_cast<std::uint64_t>(attempt));
    WorldDraft draft{height, width, std::vector<std::uint8_t>(world.occupancy_truth.size(), 0)};
    draw_features(draft, complexity, rng);
    const std::size_t occupied = static_cast<std::size_t>(
        std::count(draft.occ.begin(), draft.occ.end(), std::uint8_t{1}));
    const double fraction = static_cast<double>(occupied) / static_cast<double>(draft.occ.size());
    if (fraction < lo || fraction > hi) continue;
    world.occupancy_truth = std::move(draft.occ);
    for (std::size_t i = 0; i < world.occupancy_truth.size(); ++i) {
      if (world.occupancy_truth[i]) world.reflectivity[i] = 0.3f + 0.7f * static_cast<float>(rng.uniform());
    }
    return world;
  }
  throw NumericError("generate_world: occupied fraction never reached [2%,25%]");
}

labeler::LidarReturns render_lidar(const WorldSpec& world, const LidarConfig& cfg, int num_beams,
                                   std::uint64_t seed) {
  cfg.validate();
  const int h = world.height, w = world.width;
  const float s = world.cell_size;
  labeler::LidarReturns out;
  out.max_range = cfg.max_range;
  const int beams = cfg.num_beams > 0 ? cfg.num_beams : num_beams;
  out.hits.assign(static_cast<std::size_t>(beams), {});

#pragma omp parallel for schedule(static)
  for (int b = 0; b < beams; ++b) {
    CounterRng rng = CounterRng::stream(seed, static_cast<std::uint64_t>(b));
    if (rng.bernoulli(cfg.dropout_prob)) continue;
    const double angle = b * kTwoPi / beams;
    const double dx = std::cos(angle), dy = std::sin(angle);
    for (float t = 0.0f; t <= cfg.max_range; t += 0.5f * s) {
      const int u = static_cast<int>(std::floor(t * dy / s + h / 2.0));
      const int v = static_cast<int>(std::floor(t * dx / s + w / 2.0));
      if (u < 0 || u >= h || v < 0 || v >= w) break;
      if (world.occupied(u, v)) {
        out.hits[static_cast<std::size_t>(b)].push_back(t);
        break;
      }
    }
  }
  return out;
}

PolarScan render_radar(const WorldSpec& world, const RadarNoiseConfig& cfg, int num_azimuths, int num_range_bins,
                       float range_resolution, std::uint64_t seed) {
  cfg.validate();
  const int h = world.height, w = world.width;
  const float s = world.cell_size;
  const int theta = num_azimuths, bins = num_range_bins;

  PolarScan scan;
  scan.num_azimuths = theta;
  scan.num_range_bins = bins;
  scan.range_resolution = range_resolution;
  scan.power.assign(static_cast<std::size_t>(theta) * bins, 0.0f);

  struct Event {
    int bin;
    float power;
  };
  std::vector<std::vector<Event>> events(static_cast<std::size_t>(theta));

  // Pass 1: geometry + speckle, independent per azimuth.
#pragma omp parallel for schedule(static)
  for (int a = 0; a < theta; ++a) {
    CounterRng rng = CounterRng::stream(seed, static_cast<std::uint64_t>(a));
    const double angle = a * kTwoPi / theta;
    const double dx = std::cos(angle), dy = std::sin(angle);
    const float t_max = bins * range_resolution;

    std::vector<float> att_at_bin(static_cast<std::size_t>(bins), 1.0f);
    double cum_att = 1.0;
    int next_bin = 0;
    int prev_u = h / 2, prev_v = w / 2;
    bool prev_occ = false;
    for (float t = 0.0f; t < t_max; t += 0.5f * s) {
      while (next_bin < bins && next_bin * range_resolution <= t) {
        att_at_bin[static_cast<std::size_t>(next_bin++)] = static_cast<float>(cum_att);
      }
      const int u = static_cast<int>(std::floor(t * dy / s + h / 2.0));
      const int v = static_cast<int>(std::floor(t * dx / s + w / 2.0));
      if (u < 0 || u >= h || v < 0 || v >= w) break;  // speckle continues beyond the grid
      if (u != prev_u || v != prev_v) {
        const bool occ = world.occupied(u, v);
        if (occ && !prev_occ) {
          const int bin = std::min(static_cast<int>(std::lround(t / range_resolution)), bins - 1);
          const float refl = world.reflectivity[static_cast<std::size_t>(u) * w + v];
          events[static_cast<std::size_t>(a)].push_back(
              {bin, static_cast<float>(cfg.return_gain * refl * cum_att)});
          cum_att *= cfg.attenuation_per_hit;
        }
        prev_occ = occ;
        prev_u = u;
        prev_v = v;
      }
    }
    while (next_bin < bins) att_at_bin[static_cast<std::size_t>(next_bin++)] = static_cast<float>(cum_att);

    for (int k = 0; k < bins; ++k) {
      scan.at(a, k) = static_cast<float>(
          rng.exponential(cfg.speckle_mean_power * att_at_bin[static_cast<std::size_t>(k)]));
    }
  }

  // Pass 2: splat true returns; jitter may write a neighbouring azimuth.
  for (int a = 0; a < theta; ++a) {
    CounterRng jitter_rng = CounterRng::stream(seed, static_cast<std::uint64_t>(theta + a));
    for (const Event& e : events[static_cast<std::size_t>(a)]) {
      int dst = a;
      if (jitter_rng.bernoulli(cfg.phase_jitter_prob)) {
        dst = (a + (jitter_rng.bernoulli(0.5) ? 1 : theta - 1)) % theta;
      }
      scan.at(dst, e.bin) += e.power;
    }
  }

  // Pass 3: ghosts (same azimuth, displaced range) and saturation stripes.
#pragma omp parallel for schedule(static)
  for (int a = 0; a < theta; ++a) {
    CounterRng ghost_rng = CounterRng::stream(seed, static_cast<std::uint64_t>(2 * theta + a));
    const auto& ev = events[static_cast<std::size_t>(a)];
    if (ghost_rng.bernoulli(cfg.ghost_prob) && !ev.empty()) {
      const Event& e = ev[ghost_rng.uniform_int(ev.size())];
      const int mag = bins / 6 + static_cast<int>(ghost_rng.uniform_int(static_cast<std::uint64_t>(bins / 6 + 1)));
      const int offset = ghost_rng.bernoulli(0.5) ? mag : -mag;
      const int k = e.bin + offset;
      if (k >= 1 && k < bins) scan.at(a, k) += e.power;
    }

    CounterRng sat_rng = CounterRng::stream(seed, static_cast<std::uint64_t>(3 * theta + a));
    if (sat_rng.bernoulli(cfg.saturation_prob)) {
      const int k0 = static_cast<int>(sat_rng.uniform_int(static_cast<std::uint64_t>(bins / 4 + 1)));
      const int k1 = bins - 1 - static_cast<int>(sat_rng.uniform_int(static_cast<std::uint64_t>(bins / 8 + 1)));
      const float sat_power = 2.0f * cfg.return_gain;
      for (int k = k0; k <= k1; ++k) scan.at(a, k) = std::max(scan.at(a, k), sat_power);
    }
  }

  for (float& p : scan.power) p = std::max(p, cfg.noise_floor);
  return scan;
}

Sample make_sample(const SimConfig& config, std::uint64_t master_seed, int sample_index) {
  SimConfig cfg = config;
  cfg.normalize();
  cfg.validate();
  const std::uint64_t base = mix64(master_seed + 0x51ed270b0a3f21c7ULL * static_cast<std::uint64_t>(sample_index));
  Sample sample;
  sample.world = generate_world(cfg.height, cfg.width, cfg.cell_size, cfg.complexity, mix64(base + 1));
  sample.scan = render_radar(sample.world, cfg.radar, cfg.num_azimuths, cfg.num_range_bins, cfg.range_resolution,
                             mix64(base + 2));
  const labeler::LidarReturns returns = render_lidar(sample.world, cfg.lidar, cfg.num_azimuths, mix64(base + 3));
  sample.labels = labeler::rasterize_labels(
      returns, labeler::LabelGeometry{cfg.height, cfg.width, cfg.cell_size, cfg.center_mask_metres});
  return sample;
}

void make_dataset(const SimConfig& config, int n, std::uint64_t master_seed,
                  const std::function<void(int, const Sample&, bool)>& sink) {
  if (n < 1) throw std::invalid_argument("make_dataset: n must be >= 1");
  SimConfig cfg = config;
  cfg.normalize();
  cfg.validate();
  const int num_test = n / 10;
  const int first_test = n - num_test;

  constexpr int kChunk = 32;
  std::vector<Sample> buffer(static_cast<std::size_t>(std::min(kChunk, n)));
  for (int chunk_start = 0; chunk_start < n; chunk_start += kChunk) {
    const int chunk = std::min(kChunk, n - chunk_start);
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < chunk; ++i) {
      buffer[static_cast<std::size_t>(i)] = make_sample(cfg, master_seed, chunk_start + i);
    }
    for (int i = 0; i < chunk; ++i) {
      const int index = chunk_start + i;
      sink(index, buffer[static_cast<std::size_t>(i)], index >= first_test);
    }
  }
}

}  // namespace rism::sim
