#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "rism/grids.hpp"
#include "rism/reference.hpp"
#include "rism/rng.hpp"
#include "rism/types.hpp"

using namespace rism;

namespace {

std::vector<float> random_field(int n, std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<float> v(static_cast<std::size_t>(n));
  for (float& x : v) x = static_cast<float>(rng.uniform());
  return v;
}

}  // namespace

TEST_CASE("map: axis-aligned cells hit a single polar bin exactly") {
  // odd grid so cell centres fall exactly on the +x axis
  const auto map = grids::build_polar_cart_map(8, 16, 0.5f, 9, 9, 0.5f);
  for (int k = 1; k <= 4; ++k) {
    const std::int64_t cell = 4 * 9 + (4 + k);  // centre row, k cells right
    REQUIRE(map.in_range[cell]);
    float w_at_bin = 0.0f, w_total = 0.0f;
    for (int j = 0; j < 4; ++j) {
      w_total += map.weight[cell * 4 + j];
      if (map.src[cell * 4 + j] == static_cast<std::uint32_t>(k)) w_at_bin += map.weight[cell * 4 + j];
    }
    CHECK(w_at_bin == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(w_total == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("map: centre cell maps to range bin 0 with unit weight") {
  const auto map = grids::build_polar_cart_map(8, 16, 0.5f, 9, 9, 0.5f);
  const std::int64_t cell = 4 * 9 + 4;
  REQUIRE(map.in_range[cell]);
  // atan2(0,0) = 0 -> azimuth 0, range 0
  CHECK(map.src[cell * 4 + 0] == 0);
  CHECK(map.weight[cell * 4 + 0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("map: weights and indices agree with per-cell trigonometry") {
  // covers azimuth splitting (e.g. bearings bisecting bins at theta=8)
  const int theta = 8, bins = 16, h = 12, w = 12;
  const double res = 0.4, cell_size = 0.3;
  const auto map =
      grids::build_polar_cart_map(theta, bins, static_cast<float>(res), h, w, static_cast<float>(cell_size));
  for (int u = 0; u < h; ++u) {
    for (int v = 0; v < w; ++v) {
      const double x = (v + 0.5 - w / 2.0) * cell_size;
      const double y = (u + 0.5 - h / 2.0) * cell_size;
      const double r = std::hypot(x, y) / res;
      const std::int64_t cell = static_cast<std::int64_t>(u) * w + v;
      if (r > bins - 1) {
        CHECK(!map.in_range[cell]);
        continue;
      }
      REQUIRE(map.in_range[cell]);
      double bearing = std::atan2(y, x);
      if (bearing < 0) bearing += 2 * 3.14159265358979323846;
      const double a = bearing * theta / (2 * 3.14159265358979323846);
      const int a0 = static_cast<int>(a), r0 = static_cast<int>(r);
      const double wa = a - a0, wr = r - r0;
      const double expected[4] = {(1 - wa) * (1 - wr), (1 - wa) * wr, wa * (1 - wr), wa * wr};
      const int src_a[4] = {a0, a0, (a0 + 1) % theta, (a0 + 1) % theta};
      for (int j = 0; j < 4; ++j) {
        CHECK(map.weight[cell * 4 + j] == doctest::Approx(expected[j]).epsilon(1e-5));
        CHECK(static_cast<int>(map.src[cell * 4 + j]) / bins == src_a[j]);
      }
    }
  }
}

TEST_CASE("map: invalid dimensions are rejected") {
  CHECK_THROWS_AS(grids::build_polar_cart_map(0, 16, 0.5f, 8, 8, 0.5f), std::invalid_argument);
  CHECK_THROWS_AS(grids::build_polar_cart_map(8, -1, 0.5f, 8, 8, 0.5f), std::invalid_argument);
  CHECK_THROWS_AS(grids::build_polar_cart_map(8, 16, 0.0f, 8, 8, 0.5f), std::invalid_argument);
  CHECK_THROWS_AS(grids::build_polar_cart_map(8, 16, 0.5f, 8, 8, -0.5f), std::invalid_argument);
}

TEST_CASE("map: in-range weights sum to one") {
  const auto map = grids::build_polar_cart_map(64, 128, 0.25f, 64, 64, 0.3f);
  for (std::int64_t c = 0; c < map.num_cells(); ++c) {
    if (!map.in_range[c]) continue;
    const float sum = map.weight[c * 4] + map.weight[c * 4 + 1] + map.weight[c * 4 + 2] + map.weight[c * 4 + 3];
    REQUIRE(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("resample: constant field stays constant in range, zero outside") {
  const auto map = grids::build_polar_cart_map(16, 24, 0.5f, 32, 32, 0.5f);
  const std::vector<float> polar(16 * 24, 3.25f);
  const auto cart = grids::resample_polar_to_cart(map, polar);
  for (std::int64_t c = 0; c < map.num_cells(); ++c) {
    if (map.in_range[c]) {
      CHECK(cart[c] == doctest::Approx(3.25).epsilon(1e-6));
    } else {
      CHECK(cart[c] == 0.0f);
    }
  }
}

TEST_CASE("resample: one-hot input spreads bounded weight") {
  const auto map = grids::build_polar_cart_map(16, 24, 0.5f, 32, 32, 0.5f);
  std::vector<float> polar(16 * 24, 0.0f);
  const std::uint32_t hot = 5 * 24 + 7;
  polar[hot] = 1.0f;
  const auto cart = grids::resample_polar_to_cart(map, polar);
  for (std::int64_t c = 0; c < map.num_cells(); ++c) {
    CHECK(cart[c] >= 0.0f);
    CHECK(cart[c] <= 1.0f + 1e-6f);
    if (cart[c] > 0.0f) {
      bool sourced = false;
      for (int j = 0; j < 4; ++j) sourced |= map.src[c * 4 + j] == hot;
      CHECK(sourced);
    }
  }
}

TEST_CASE("resample: matches the serial trigonometric oracle") {
  const int theta = 8, bins = 16, h = 20, w = 20;
  const float res = 0.5f, cell = 0.4f;
  const auto map = grids::build_polar_cart_map(theta, bins, res, h, w, cell);
  const auto polar = random_field(theta * bins, 42);
  const auto cart = grids::resample_polar_to_cart(map, polar);
  std::vector<float> expected(static_cast<std::size_t>(h) * w);
  ref::resample_polar_to_cart(polar.data(), theta, bins, res, h, w, cell, expected.data());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(cart[i] == doctest::Approx(expected[i]).epsilon(1e-5));
  }
}

TEST_CASE("resample: linearity") {
  const auto map = grids::build_polar_cart_map(12, 20, 0.5f, 16, 16, 0.5f);
  const auto x = random_field(12 * 20, 1);
  const auto y = random_field(12 * 20, 2);
  const float a = 1.7f, b = -0.6f;
  std::vector<float> combo(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) combo[i] = a * x[i] + b * y[i];
  const auto lhs = grids::resample_polar_to_cart(map, combo);
  const auto rx = grids::resample_polar_to_cart(map, x);
  const auto ry = grids::resample_polar_to_cart(map, y);
  for (std::size_t i = 0; i < lhs.size(); ++i) {
    CHECK(lhs[i] == doctest::Approx(a * rx[i] + b * ry[i]).epsilon(1e-4));
  }
}

TEST_CASE("resample backward: zero gradient and single-cell definition") {
  const auto map = grids::build_polar_cart_map(12, 20, 0.5f, 16, 16, 0.5f);
  const std::vector<float> zeros(static_cast<std::size_t>(map.num_cells()), 0.0f);
  for (float g : grids::resample_polar_to_cart_backward(map, zeros)) CHECK(g == 0.0f);

  std::vector<float> grad(zeros);
  std::int64_t cell = -1;
  for (std::int64_t c = 0; c < map.num_cells(); ++c) {
    if (map.in_range[c]) {
      cell = c;
      break;
    }
  }
  REQUIRE(cell >= 0);
  grad[static_cast<std::size_t>(cell)] = 1.0f;
  const auto back = grids::resample_polar_to_cart_backward(map, grad);
  const double total = std::accumulate(back.begin(), back.end(), 0.0);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
  for (int j = 0; j < 4; ++j) {
    CHECK(back[map.src[cell * 4 + j]] >= map.weight[cell * 4 + j] - 1e-6f);
  }
}

TEST_CASE("resample backward: adjoint identity on random pairs") {
  const auto map = grids::build_polar_cart_map(16, 24, 0.4f, 24, 24, 0.35f);
  for (std::uint64_t trial = 0; trial < 8; ++trial) {
    const auto x = random_field(16 * 24, 100 + trial);
    const auto g = random_field(24 * 24, 200 + trial);
    const auto fx = grids::resample_polar_to_cart(map, x);
    const auto btg = grids::resample_polar_to_cart_backward(map, g);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < fx.size(); ++i) lhs += static_cast<double>(fx[i]) * g[i];
    for (std::size_t i = 0; i < x.size(); ++i) rhs += static_cast<double>(x[i]) * btg[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-5));
  }
}

TEST_CASE("resample: shape mismatches are rejected") {
  const auto map = grids::build_polar_cart_map(8, 16, 0.5f, 8, 8, 0.5f);
  CHECK_THROWS_AS(grids::resample_polar_to_cart(map, std::vector<float>(7)), std::invalid_argument);
  CHECK_THROWS_AS(grids::resample_polar_to_cart_backward(map, std::vector<float>(9)), std::invalid_argument);
}

namespace {

PolarScan make_scan(int theta, int bins, std::uint64_t seed) {
  PolarScan scan;
  scan.num_azimuths = theta;
  scan.num_range_bins = bins;
  scan.range_resolution = 0.5f;
  scan.power = random_field(theta * bins, seed);
  return scan;
}

LabelSet make_labels(int h, int w, std::uint64_t seed) {
  LabelSet labels;
  labels.height = h;
  labels.width = w;
  labels.occupancy.assign(static_cast<std::size_t>(h) * w, 0);
  labels.observability.assign(static_cast<std::size_t>(h) * w, 0);
  CounterRng rng(seed);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    labels.observability[i] = static_cast<std::uint8_t>(rng.uniform_int(3));
    if (labels.observability[i] == kObserved) labels.occupancy[i] = rng.bernoulli(0.3) ? 1 : 0;
  }
  return labels;
}

}  // namespace

TEST_CASE("rotate_pair: zero angle is the identity") {
  const auto scan = make_scan(16, 8, 5);
  const auto labels = make_labels(16, 16, 6);
  const auto [rs, rl] = grids::rotate_pair(scan, labels, 0);
  CHECK(rs.power == scan.power);
  CHECK(rl.occupancy == labels.occupancy);
  CHECK(rl.observability == labels.observability);
}

TEST_CASE("rotate_pair: half turn shifts rows and point-reflects labels") {
  const auto scan = make_scan(16, 8, 7);
  const auto labels = make_labels(16, 16, 8);
  const auto [rs, rl] = grids::rotate_pair(scan, labels, 8);
  for (int a = 0; a < 16; ++a) {
    for (int r = 0; r < 8; ++r) CHECK(rs.at((a + 8) % 16, r) == scan.at(a, r));
  }
  // on an even grid the 180-degree nearest-neighbour rotation is an exact
  // point reflection
  std::int64_t occ_in = 0, occ_out = 0;
  for (int u = 0; u < 16; ++u) {
    for (int v = 0; v < 16; ++v) {
      CHECK(rl.occupancy[rl.index(u, v)] == labels.occupancy[labels.index(15 - u, 15 - v)]);
      CHECK(rl.observability[rl.index(u, v)] == labels.observability[labels.index(15 - u, 15 - v)]);
      occ_in += labels.occupancy[labels.index(u, v)];
      occ_out += rl.occupancy[rl.index(u, v)];
    }
  }
  CHECK(std::abs(occ_in - occ_out) * 20 <= occ_in);  // count preserved within 5%
}

TEST_CASE("rotate_pair: four quarter turns are the identity") {
  auto scan = make_scan(16, 8, 9);
  auto labels = make_labels(16, 16, 10);
  const auto orig_scan = scan;
  const auto orig_labels = labels;
  for (int i = 0; i < 4; ++i) {
    auto [s, l] = grids::rotate_pair(scan, labels, 4);
    scan = std::move(s);
    labels = std::move(l);
  }
  CHECK(scan.power == orig_scan.power);
  CHECK(labels.occupancy == orig_labels.occupancy);
  CHECK(labels.observability == orig_labels.observability);
}

TEST_CASE("rotate_pair: shift by k then theta-k restores the scan") {
  const auto scan = make_scan(16, 8, 11);
  const auto labels = make_labels(16, 16, 12);
  for (int k : {1, 5, 11}) {
    auto [s1, l1] = grids::rotate_pair(scan, labels, k);
    auto [s2, l2] = grids::rotate_pair(s1, l1, 16 - k);
    CHECK(s2.power == scan.power);
  }
}

TEST_CASE("domain types: invariant validation") {
  PolarScan scan = make_scan(8, 8, 1);
  CHECK_NOTHROW(scan.validate());
  scan.power[3] = -1.0f;
  CHECK_THROWS_AS(scan.validate(), std::invalid_argument);
  scan.power[3] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(scan.validate(), std::invalid_argument);

  CartesianGrid grid{15, 16, 0.3f, std::vector<float>(15 * 16, 0.0f)};
  CHECK_THROWS_AS(grid.validate(), std::invalid_argument);  // odd height
  grid.height = 16;
  grid.values.assign(16 * 16, 0.0f);
  CHECK_NOTHROW(grid.validate());

  WorldSpec world;
  world.height = world.width = 16;
  world.cell_size = 0.3f;
  world.occupancy_truth.assign(256, 0);
  world.reflectivity.assign(256, 0.0f);
  world.reflectivity[5] = 0.4f;  // reflective but free
  CHECK_THROWS_AS(world.validate(), std::invalid_argument);
  world.occupancy_truth[5] = 1;
  CHECK_NOTHROW(world.validate());
}
