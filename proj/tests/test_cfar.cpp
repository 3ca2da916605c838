#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "rism/cfar.hpp"
#include "rism/eval.hpp"
#include "rism/reference.hpp"
#include "rism/rng.hpp"

using namespace rism;
using cfar::CfarConfig;

namespace {

std::vector<float> exponential_noise(std::size_t n, double mean, std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.exponential(mean));
  return v;
}

}  // namespace

TEST_CASE("cfar 1d: constant signal never detects") {
  const std::vector<float> signal(64, 1.0f);
  for (float pfa : {0.3f, 0.01f, 1e-4f}) {
    const auto det = cfar::ca_cfar_1d(signal, {4, 1, pfa});
    CHECK(std::count(det.begin(), det.end(), 1) == 0);
  }
}

TEST_CASE("cfar 1d: the worked spike example") {
  const std::vector<float> signal{1, 1, 1, 10, 1, 1, 1};
  const auto det = cfar::ca_cfar_1d(signal, {2, 1, 1e-2f});
  for (int i = 0; i < 7; ++i) CHECK(det[static_cast<std::size_t>(i)] == (i == 3 ? 1 : 0));
}

TEST_CASE("cfar 1d: empirical false-alarm rate within 2x of configured") {
  const std::size_t n = 100000;
  const auto noise = exponential_noise(n, 1.0, 99);
  const CfarConfig cfg{8, 2, 1e-2f};  // N_t = 16 interior
  const auto det = cfar::ca_cfar_1d(noise, cfg);
  const double rate = static_cast<double>(std::count(det.begin(), det.end(), 1)) / static_cast<double>(n);
  CHECK(rate > 0.5e-2);
  CHECK(rate < 2.0e-2);
}

TEST_CASE("cfar 1d: matches the brute-force window oracle") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CounterRng rng(seed);
    const int n = 40 + static_cast<int>(rng.uniform_int(60));
    const int train = 1 + static_cast<int>(rng.uniform_int(6));
    const int guard = static_cast<int>(rng.uniform_int(3));
    if (n <= 2 * (train + guard)) continue;
    const float pfa = static_cast<float>(std::pow(10.0, -1.0 - 3.0 * rng.uniform()));
    const auto signal = exponential_noise(static_cast<std::size_t>(n), 1.0, 1000 + seed);
    const auto actual = cfar::ca_cfar_1d(signal, {train, guard, pfa});
    const auto expected = ref::ca_cfar_1d(signal.data(), n, train, guard, pfa);
    REQUIRE(actual == expected);
  }
}

TEST_CASE("cfar 1d: window must fit") {
  const std::vector<float> s(10, 1.0f);
  CHECK_THROWS_AS(cfar::ca_cfar_1d(s, {4, 1, 0.01f}), std::invalid_argument);
  CHECK_NOTHROW(cfar::ca_cfar_1d(s, {3, 1, 0.01f}));
}

TEST_CASE("cfar 2d: constant grid never detects") {
  const std::vector<float> grid(32 * 32, 2.5f);
  const auto det = cfar::ca_cfar_2d(grid, 32, 32, {3, 1, 0.01f});
  CHECK(std::count(det.begin(), det.end(), 1) == 0);
}

TEST_CASE("cfar 2d: lone bright cell detected exactly once") {
  std::vector<float> grid(32 * 32, 1.0f);
  grid[17 * 32 + 11] = 80.0f;
  const auto det = cfar::ca_cfar_2d(grid, 32, 32, {3, 1, 1e-3f});
  CHECK(std::count(det.begin(), det.end(), 1) == 1);
  CHECK(det[17 * 32 + 11] == 1);
}

TEST_CASE("cfar 2d: matches the brute-force ring oracle") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CounterRng rng(seed);
    const int h = 20 + static_cast<int>(rng.uniform_int(16));
    const int w = 20 + static_cast<int>(rng.uniform_int(16));
    const int train = 1 + static_cast<int>(rng.uniform_int(4));
    const int guard = static_cast<int>(rng.uniform_int(3));
    if (h <= 2 * (train + guard) || w <= 2 * (train + guard)) continue;
    const float pfa = static_cast<float>(std::pow(10.0, -1.0 - 2.0 * rng.uniform()));
    const auto grid = exponential_noise(static_cast<std::size_t>(h) * w, 1.0, 2000 + seed);
    const auto actual = cfar::ca_cfar_2d(grid, h, w, {train, guard, pfa});
    const auto expected = ref::ca_cfar_2d(grid.data(), h, w, train, guard, pfa);
    REQUIRE(actual == expected);
  }
}

TEST_CASE("cfar 2d: reduces to weighted 1D arithmetic on separable input") {
  // rows all equal: the ring sums collapse to column-weighted 1D sums
  const int h = 24, w = 40;
  const auto row = exponential_noise(static_cast<std::size_t>(w), 1.0, 31);
  std::vector<float> grid(static_cast<std::size_t>(h) * w);
  for (int u = 0; u < h; ++u) std::copy(row.begin(), row.end(), grid.begin() + static_cast<std::ptrdiff_t>(u) * w);

  const CfarConfig cfg{2, 1, 0.01f};
  const auto det2d = cfar::ca_cfar_2d(grid, h, w, cfg);

  const int outer = cfg.num_train_cells + cfg.num_guard_cells;
  const int u = h / 2;  // interior row: full vertical windows
  for (int v = outer; v < w - outer; ++v) {
    double sum = 0.0;
    int count = 0;
    for (int dv = -outer; dv <= outer; ++dv) {
      const int col_cells_outer = 2 * outer + 1;
      const int col_cells_guard = std::abs(dv) <= cfg.num_guard_cells ? 2 * cfg.num_guard_cells + 1 : 0;
      const int cells = col_cells_outer - col_cells_guard;
      sum += static_cast<double>(row[static_cast<std::size_t>(v + dv)]) * cells;
      count += cells;
    }
    const double alpha = count * (std::pow(0.01, -1.0 / count) - 1.0);
    const bool expected = row[static_cast<std::size_t>(v)] > alpha * (sum / count);
    CHECK(det2d[static_cast<std::size_t>(u) * w + v] == (expected ? 1 : 0));
  }
}

TEST_CASE("cfar: scale invariance and Pfa monotonicity") {
  const auto signal = exponential_noise(4096, 1.0, 7);
  const CfarConfig cfg{6, 2, 1e-2f};
  const auto base = cfar::ca_cfar_1d(signal, cfg);

  std::vector<float> scaled(signal);
  for (float& x : scaled) x *= 37.5f;
  CHECK(cfar::ca_cfar_1d(scaled, cfg) == base);

  const auto loose = cfar::ca_cfar_1d(signal, {6, 2, 5e-2f});
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (base[i]) CHECK(loose[i]);  // tighter Pfa detections are a subset
  }
}

TEST_CASE("static threshold") {
  const std::vector<float> v{0.1f, 0.5f, 0.9f, 0.2f};
  const auto none = cfar::static_threshold(v, 1.0f);
  CHECK(std::count(none.begin(), none.end(), 1) == 0);
  const auto all = cfar::static_threshold(v, -std::numeric_limits<float>::max());
  CHECK(std::count(all.begin(), all.end(), 1) == 4);
  const auto mixed = cfar::static_threshold(v, 0.35f);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(mixed[i] == (v[i] > 0.35f ? 1 : 0));
  CHECK_THROWS_AS(cfar::static_threshold(v, std::numeric_limits<float>::quiet_NaN()), std::invalid_argument);
}

namespace {

std::vector<sim::Sample> tiny_dataset(int n, std::uint64_t seed) {
  sim::SimConfig cfg;
  cfg.height = cfg.width = 32;
  cfg.num_azimuths = 16;
  cfg.num_range_bins = 32;
  cfg.complexity = 2;
  std::vector<sim::Sample> samples;
  sim::make_dataset(cfg, n, seed, [&](int, const sim::Sample& s, bool) { samples.push_back(s); });
  return samples;
}

}  // namespace

TEST_CASE("tune: argmax over the search grid with deterministic tie-breaks") {
  const auto samples = tiny_dataset(6, 11);
  const auto map = grids::build_polar_cart_map(16, 32, 0.25f, 32, 32, 0.3f);

  SUBCASE("single-point grid returns that config") {
    const std::vector<CfarConfig> grid{{3, 1, 0.05f}};
    const auto tuned = cfar::tune(cfar::Method::kCfar1dPolar, samples, map, grid, {});
    CHECK(tuned.config.num_train_cells == 3);
    CHECK(tuned.config.num_guard_cells == 1);
    CHECK(tuned.config.prob_false_alarm == 0.05f);
  }

  SUBCASE("returned mean IoU is maximal over the grid") {
    const auto grid = cfar::default_cfar_grid();
    const auto tuned = cfar::tune(cfar::Method::kCfar2dCartesian, samples, map, grid, {});
    const auto lookup = cfar::build_nearest_polar_lookup(16, 32, 0.25f, 32, 32, 0.3f);
    for (const auto& cfg : grid) {
      eval::ConfusionCounts counts;
      cfar::TuneResult cand;
      cand.method = cfar::Method::kCfar2dCartesian;
      cand.config = cfg;
      for (const auto& s : samples) counts.accumulate(cfar::detect(cand, s, map, lookup).data(), s.labels);
      CHECK(tuned.mean_iou >= eval::iou_from_counts(counts).mean_iou - 1e-12);
    }
  }

  SUBCASE("identical scores break toward the smaller window, then smaller pfa") {
    // constant scans make every config detect nothing
    std::vector<sim::Sample> flat = samples;
    for (auto& s : flat) std::fill(s.scan.power.begin(), s.scan.power.end(), 1.0f);
    const std::vector<CfarConfig> grid{{8, 2, 1e-3f}, {2, 1, 1e-2f}, {2, 1, 1e-3f}, {4, 0, 1e-3f}};
    const auto tuned = cfar::tune(cfar::Method::kCfar1dPolar, flat, map, grid, {});
    CHECK(tuned.config.num_train_cells == 2);
    CHECK(tuned.config.num_guard_cells == 1);
    CHECK(tuned.config.prob_false_alarm == 1e-3f);
  }

  SUBCASE("empty search grid or dataset is rejected") {
    CHECK_THROWS_AS(cfar::tune(cfar::Method::kCfar1dPolar, samples, map, {}, {}), std::invalid_argument);
    CHECK_THROWS_AS(cfar::tune(cfar::Method::kStaticThreshold, samples, map, {}, {}), std::invalid_argument);
    CHECK_THROWS_AS(cfar::tune(cfar::Method::kCfar1dPolar, {}, map, cfar::default_cfar_grid(), {}),
                    std::invalid_argument);
  }

  SUBCASE("static thresholding tunes over tau") {
    const auto taus = cfar::default_tau_grid(samples, map);
    REQUIRE(!taus.empty());
    const auto tuned = cfar::tune(cfar::Method::kStaticThreshold, samples, map, {}, taus);
    CHECK(tuned.mean_iou > 0.0);
    CHECK(std::find(taus.begin(), taus.end(), tuned.tau) != taus.end());
  }
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(CfarConfig{0, 1, 0.1f}.validate(), std::invalid_argument);
  CHECK_THROWS_AS(CfarConfig{1, -1, 0.1f}.validate(), std::invalid_argument);
  CHECK_THROWS_AS(CfarConfig{1, 1, 0.0f}.validate(), std::invalid_argument);
  CHECK_THROWS_AS(CfarConfig{1, 1, 1.0f}.validate(), std::invalid_argument);
  CHECK_NOTHROW(CfarConfig{1, 0, 0.5f}.validate());
}
