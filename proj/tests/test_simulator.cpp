#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "rism/rng.hpp"
#include "rism/simulator.hpp"

using namespace rism;

namespace {

WorldSpec empty_world(int h, int w, float cell_size) {
  WorldSpec world;
  world.height = h;
  world.width = w;
  world.cell_size = cell_size;
  world.occupancy_truth.assign(static_cast<std::size_t>(h) * w, 0);
  world.reflectivity.assign(world.occupancy_truth.size(), 0.0f);
  return world;
}

void put_wall_column(WorldSpec& world, int v, float reflectivity) {
  for (int u = 0; u < world.height; ++u) {
    world.occupancy_truth[static_cast<std::size_t>(u) * world.width + v] = 1;
    world.reflectivity[static_cast<std::size_t>(u) * world.width + v] = reflectivity;
  }
}

sim::RadarNoiseConfig quiet_radar() {
  sim::RadarNoiseConfig cfg;
  cfg.speckle_mean_power = 0.0f;
  cfg.saturation_prob = 0.0f;
  cfg.ghost_prob = 0.0f;
  cfg.phase_jitter_prob = 0.0f;
  cfg.noise_floor = 0.0f;
  return cfg;
}

// independent fine-step ray march to the first occupied cell
double oracle_first_hit(const WorldSpec& world, double angle, double max_range) {
  const double step = world.cell_size / 100.0;
  const double dx = std::cos(angle), dy = std::sin(angle);
  for (double t = 0.0; t <= max_range; t += step) {
    const int u = static_cast<int>(std::floor(t * dy / world.cell_size + world.height / 2.0));
    const int v = static_cast<int>(std::floor(t * dx / world.cell_size + world.width / 2.0));
    if (u < 0 || u >= world.height || v < 0 || v >= world.width) return -1.0;
    if (world.occupied(u, v)) return t;
  }
  return -1.0;
}

}  // namespace

TEST_CASE("generate_world: complexity zero is empty") {
  const WorldSpec world = sim::generate_world(32, 32, 0.3f, 0, 99);
  CHECK(std::count(world.occupancy_truth.begin(), world.occupancy_truth.end(), 1) == 0);
}

TEST_CASE("generate_world: deterministic in seed") {
  const WorldSpec a = sim::generate_world(64, 64, 0.3f, 3, 1234);
  const WorldSpec b = sim::generate_world(64, 64, 0.3f, 3, 1234);
  CHECK(a.occupancy_truth == b.occupancy_truth);
  CHECK(a.reflectivity == b.reflectivity);
  const WorldSpec c = sim::generate_world(64, 64, 0.3f, 3, 1235);
  CHECK(a.occupancy_truth != c.occupancy_truth);
}

TEST_CASE("generate_world: occupied fraction bounded, centre block free, valid") {
  for (std::uint64_t seed : {1u, 7u, 42u, 1000u}) {
    const WorldSpec world = sim::generate_world(64, 64, 0.3f, 3, seed);
    CHECK_NOTHROW(world.validate());
    const auto occupied = std::count(world.occupancy_truth.begin(), world.occupancy_truth.end(), 1);
    const double fraction = static_cast<double>(occupied) / (64.0 * 64.0);
    CHECK(fraction >= 0.02);
    CHECK(fraction <= 0.25);
    for (int du = -1; du <= 1; ++du) {
      for (int dv = -1; dv <= 1; ++dv) CHECK(!world.occupied(32 + du, 32 + dv));
    }
  }
}

TEST_CASE("generate_world: rejects too-small grids") {
  CHECK_THROWS_AS(sim::generate_world(8, 32, 0.3f, 1, 1), std::invalid_argument);
}

TEST_CASE("render_lidar: empty world yields no returns") {
  const WorldSpec world = empty_world(32, 32, 0.3f);
  sim::LidarConfig cfg;
  cfg.max_range = 4.0f;
  cfg.dropout_prob = 0.0f;
  const auto returns = sim::render_lidar(world, cfg, 16, 5);
  for (const auto& beam : returns.hits) CHECK(beam.empty());
}

TEST_CASE("render_lidar: single cell on the +x axis") {
  WorldSpec world = empty_world(64, 64, 0.3f);
  world.occupancy_truth[32 * 64 + 42] = 1;  // 10 cells right of centre
  world.reflectivity[32 * 64 + 42] = 1.0f;
  sim::LidarConfig cfg;
  cfg.max_range = 8.0f;
  cfg.dropout_prob = 0.0f;
  const auto returns = sim::render_lidar(world, cfg, 64, 5);
  REQUIRE(returns.hits[0].size() == 1);
  CHECK(returns.hits[0][0] == doctest::Approx(3.0).epsilon(0.06));  // within half a cell
  int beams_with_hits = 0;
  for (const auto& beam : returns.hits) beams_with_hits += !beam.empty();
  CHECK(beams_with_hits <= 3);  // only rays passing the cell
}

TEST_CASE("render_lidar: ranges match a fine ray-march oracle") {
  const WorldSpec world = sim::generate_world(64, 64, 0.3f, 3, 77);
  sim::LidarConfig cfg;
  cfg.max_range = 9.0f;
  cfg.dropout_prob = 0.0f;
  const int beams = 64;
  const auto returns = sim::render_lidar(world, cfg, beams, 6);
  for (int b = 0; b < beams; ++b) {
    const double angle = b * 2.0 * 3.14159265358979323846 / beams;
    const double expected = oracle_first_hit(world, angle, cfg.max_range);
    if (returns.hits[static_cast<std::size_t>(b)].empty()) {
      // either no intersection or the oracle hit just past max_range
      if (expected >= 0.0) CHECK(expected > cfg.max_range - 0.3);
    } else {
      REQUIRE(expected >= 0.0);
      CHECK(std::abs(returns.hits[static_cast<std::size_t>(b)][0] - expected) <= 0.5 * world.cell_size + 1e-5);
    }
  }
}

TEST_CASE("render_lidar: returns never lie beyond the first occupied cell") {
  for (std::uint64_t seed : {3u, 9u}) {
    const WorldSpec world = sim::generate_world(48, 48, 0.3f, 2, seed);
    sim::LidarConfig cfg;
    cfg.max_range = 7.0f;
    cfg.dropout_prob = 0.2f;
    const auto returns = sim::render_lidar(world, cfg, 48, seed);
    for (int b = 0; b < 48; ++b) {
      if (returns.hits[static_cast<std::size_t>(b)].empty()) continue;
      const double angle = b * 2.0 * 3.14159265358979323846 / 48;
      const double first = oracle_first_hit(world, angle, cfg.max_range);
      REQUIRE(first >= 0.0);
      CHECK(returns.hits[static_cast<std::size_t>(b)][0] <= first + 0.5 * world.cell_size + 1e-5);
    }
  }
}

TEST_CASE("render_radar: speckle mean matches the configured exponential") {
  const WorldSpec world = empty_world(32, 32, 0.3f);
  sim::RadarNoiseConfig cfg = quiet_radar();
  cfg.speckle_mean_power = 0.35f;
  const int theta = 16, bins = 640;  // ~10^4 background bins
  const PolarScan scan = sim::render_radar(world, cfg, theta, bins, 0.25f, 11);
  double sum = 0.0;
  for (float p : scan.power) sum += p;
  const double mean = sum / static_cast<double>(scan.power.size());
  CHECK(mean == doctest::Approx(0.35).epsilon(0.05));
}

TEST_CASE("render_radar: speckle marginal passes a KS check") {
  const WorldSpec world = empty_world(32, 32, 0.3f);
  sim::RadarNoiseConfig cfg = quiet_radar();
  cfg.speckle_mean_power = 1.0f;
  const PolarScan scan = sim::render_radar(world, cfg, 100, 1000, 0.25f, 13);  // 10^5 samples
  std::vector<float> sorted = scan.power;
  std::sort(sorted.begin(), sorted.end());
  double ks = 0.0;
  const double n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double cdf = 1.0 - std::exp(-static_cast<double>(sorted[i]));
    ks = std::max(ks, std::abs(cdf - (i + 1) / n));
    ks = std::max(ks, std::abs(cdf - i / n));
  }
  CHECK(ks < 0.02);
}

TEST_CASE("render_radar: full occlusion at zero transmission") {
  WorldSpec world = empty_world(64, 64, 0.3f);
  put_wall_column(world, 42, 1.0f);  // wall 10 cells right of centre
  sim::RadarNoiseConfig cfg = quiet_radar();
  cfg.speckle_mean_power = 0.2f;
  cfg.attenuation_per_hit = 0.0f;
  cfg.noise_floor = 1e-4f;
  const int bins = 64;
  const PolarScan scan = sim::render_radar(world, cfg, 64, bins, 0.25f, 17);
  // along the +x beam the wall sits at 3.0 m = bin 12
  const int wall_bin = 12;
  CHECK(scan.at(0, wall_bin) == doctest::Approx(1.0).epsilon(1e-5));
  for (int k = wall_bin + 1; k < bins; ++k) CHECK(scan.at(0, k) == cfg.noise_floor);
}

TEST_CASE("render_radar: attenuated second return follows the generative formula") {
  WorldSpec world = empty_world(64, 64, 0.3f);
  put_wall_column(world, 37, 0.8f);  // 5 cells right: 1.5 m -> bin 6
  put_wall_column(world, 42, 0.6f);  // 10 cells right: 3.0 m -> bin 12
  sim::RadarNoiseConfig cfg = quiet_radar();
  cfg.return_gain = 2.0f;
  cfg.attenuation_per_hit = 0.5f;
  const PolarScan scan = sim::render_radar(world, cfg, 64, 64, 0.25f, 19);
  CHECK(scan.at(0, 6) == doctest::Approx(2.0 * 0.8).epsilon(1e-5));
  CHECK(scan.at(0, 12) == doctest::Approx(0.5 * 2.0 * 0.6).epsilon(1e-5));
}

TEST_CASE("render_radar: deterministic in seed") {
  const WorldSpec world = sim::generate_world(48, 48, 0.3f, 2, 5);
  sim::RadarNoiseConfig cfg;  // defaults: all noise sources on
  const PolarScan a = sim::render_radar(world, cfg, 32, 64, 0.25f, 21);
  const PolarScan b = sim::render_radar(world, cfg, 32, 64, 0.25f, 21);
  CHECK(a.power == b.power);
  const PolarScan c = sim::render_radar(world, cfg, 32, 64, 0.25f, 22);
  CHECK(a.power != c.power);
  CHECK_NOTHROW(a.validate());
}

TEST_CASE("make_dataset: split contract and determinism") {
  sim::SimConfig cfg;
  cfg.height = cfg.width = 32;
  cfg.num_azimuths = 16;
  cfg.num_range_bins = 32;
  cfg.complexity = 2;

  SUBCASE("n = 1 goes to train") {
    int count = 0;
    sim::make_dataset(cfg, 1, 3, [&](int index, const sim::Sample&, bool is_test) {
      CHECK(index == 0);
      CHECK(!is_test);
      ++count;
    });
    CHECK(count == 1);
  }

  SUBCASE("n = 10 splits 9/1") {
    int train = 0, test = 0;
    sim::make_dataset(cfg, 10, 3, [&](int index, const sim::Sample&, bool is_test) {
      (is_test ? test : train) += 1;
      if (index == 9) CHECK(is_test);
    });
    CHECK(train == 9);
    CHECK(test == 1);
  }

  SUBCASE("same master seed reproduces every sample bit for bit") {
    std::vector<sim::Sample> first, second;
    sim::make_dataset(cfg, 6, 77, [&](int, const sim::Sample& s, bool) { first.push_back(s); });
    sim::make_dataset(cfg, 6, 77, [&](int, const sim::Sample& s, bool) { second.push_back(s); });
    for (std::size_t i = 0; i < first.size(); ++i) {
      CHECK(first[i].scan.power == second[i].scan.power);
      CHECK(first[i].labels.occupancy == second[i].labels.occupancy);
      CHECK(first[i].labels.observability == second[i].labels.observability);
      CHECK(first[i].world.occupancy_truth == second[i].world.occupancy_truth);
    }
  }

  SUBCASE("n = 0 is rejected") {
    CHECK_THROWS_AS(sim::make_dataset(cfg, 0, 1, [](int, const sim::Sample&, bool) {}), std::invalid_argument);
  }
}
