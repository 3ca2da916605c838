#include "rism/cfar.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rism/eval.hpp"

namespace rism::cfar {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// alpha lookup per surviving training-cell count (clipped windows shrink N_t)
std::vector<double> alpha_table(int max_count, double pfa) {
  std::vector<double> alpha(static_cast<std::size_t>(max_count) + 1, 0.0);
  for (int n = 1; n <= max_count; ++n) {
    alpha[static_cast<std::size_t>(n)] = n * (std::pow(pfa, -1.0 / n) - 1.0);
  }
  return alpha;
}

}  // namespace

void CfarConfig::validate() const {
  if (num_train_cells < 1) throw std::invalid_argument("CfarConfig: num_train_cells must be >= 1");
  if (num_guard_cells < 0) throw std::invalid_argument("CfarConfig: num_guard_cells must be >= 0");
  if (!(prob_false_alarm > 0.0f && prob_false_alarm < 1.0f))
    throw std::invalid_argument("CfarConfig: prob_false_alarm must lie in (0,1)");
}

std::string CfarConfig::digest() const {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "train=%d,guard=%d,pfa=%g", num_train_cells, num_guard_cells,
                static_cast<double>(prob_false_alarm));
  return buf;
}

std::vector<std::uint8_t> ca_cfar_1d(std::span<const float> signal, const CfarConfig& cfg) {
  cfg.validate();
  const int n = static_cast<int>(signal.size());
  const int train = cfg.num_train_cells, guard = cfg.num_guard_cells;
  if (n <= 2 * (train + guard)) throw std::invalid_argument("ca_cfar_1d: window exceeds signal");

  std::vector<double> prefix(static_cast<std::size_t>(n) + 1, 0.0);
  for (int i = 0; i < n; ++i) prefix[static_cast<std::size_t>(i) + 1] = prefix[static_cast<std::size_t>(i)] + signal[static_cast<std::size_t>(i)];
  const auto window_sum = [&](int lo, int hi) {  // [lo, hi] clipped
    lo = std::max(lo, 0);
    hi = std::min(hi, n - 1);
    if (lo > hi) return std::pair<double, int>{0.0, 0};
    return std::pair<double, int>{prefix[static_cast<std::size_t>(hi) + 1] - prefix[static_cast<std::size_t>(lo)],
                                  hi - lo + 1};
  };

  const std::vector<double> alpha = alpha_table(2 * train, cfg.prob_false_alarm);
  std::vector<std::uint8_t> det(static_cast<std::size_t>(n), 0);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const auto [left, nl] = window_sum(i - guard - train, i - guard - 1);
    const auto [right, nr] = window_sum(i + guard + 1, i + guard + train);
    const int count = nl + nr;
    if (count == 0) continue;
    const double noise = (left + right) / count;
    det[static_cast<std::size_t>(i)] =
        signal[static_cast<std::size_t>(i)] > alpha[static_cast<std::size_t>(count)] * noise ? 1 : 0;
  }
  return det;
}

std::vector<std::uint8_t> ca_cfar_polar(const PolarScan& scan, const CfarConfig& cfg) {
  std::vector<std::uint8_t> det(scan.power.size(), 0);
  const int bins = scan.num_range_bins;
  for (int a = 0; a < scan.num_azimuths; ++a) {
    const auto row = ca_cfar_1d(std::span<const float>(scan.power).subspan(
                                    static_cast<std::size_t>(a) * bins, static_cast<std::size_t>(bins)),
                                cfg);
    std::copy(row.begin(), row.end(), det.begin() + static_cast<std::size_t>(a) * bins);
  }
  return det;
}

std::vector<std::uint8_t> ca_cfar_2d(std::span<const float> grid, int height, int width, const CfarConfig& cfg) {
  cfg.validate();
  const int train = cfg.num_train_cells, guard = cfg.num_guard_cells;
  if (height <= 2 * (train + guard) || width <= 2 * (train + guard))
    throw std::invalid_argument("ca_cfar_2d: window exceeds grid");
  if (grid.size() != static_cast<std::size_t>(height) * width)
    throw std::invalid_argument("ca_cfar_2d: grid shape mismatch");

  // summed-area table with a zero top row / left column
  std::vector<double> sat(static_cast<std::size_t>(height + 1) * (width + 1), 0.0);
  for (int u = 0; u < height; ++u) {
    double row = 0.0;
    for (int v = 0; v < width; ++v) {
      row += grid[static_cast<std::size_t>(u) * width + v];
      sat[static_cast<std::size_t>(u + 1) * (width + 1) + v + 1] =
          sat[static_cast<std::size_t>(u) * (width + 1) + v + 1] + row;
    }
  }
  const auto rect = [&](int u0, int v0, int u1, int v1) {  // inclusive, clipped
    u0 = std::max(u0, 0);
    v0 = std::max(v0, 0);
    u1 = std::min(u1, height - 1);
    v1 = std::min(v1, width - 1);
    if (u0 > u1 || v0 > v1) return std::pair<double, int>{0.0, 0};
    const double s = sat[static_cast<std::size_t>(u1 + 1) * (width + 1) + v1 + 1] -
                     sat[static_cast<std::size_t>(u0) * (width + 1) + v1 + 1] -
                     sat[static_cast<std::size_t>(u1 + 1) * (width + 1) + v0] +
                     sat[static_cast<std::size_t>(u0) * (width + 1) + v0];
    return std::pair<double, int>{s, (u1 - u0 + 1) * (v1 - v0 + 1)};
  };

  const int outer = guard + train;
  const int max_count = (2 * outer + 1) * (2 * outer + 1) - (2 * guard + 1) * (2 * guard + 1);
  const std::vector<double> alpha = alpha_table(max_count, cfg.prob_false_alarm);

  std::vector<std::uint8_t> det(grid.size(), 0);
#pragma omp parallel for schedule(static)
  for (int u = 0; u < height; ++u) {
    for (int v = 0; v < width; ++v) {
      const auto [outer_sum, outer_n] = rect(u - outer, v - outer, u + outer, v + outer);
      const auto [inner_sum, inner_n] = rect(u - guard, v - guard, u + guard, v + guard);
      const int count = outer_n - inner_n;
      if (count == 0) continue;
      const double noise = (outer_sum - inner_sum) / count;
      det[static_cast<std::size_t>(u) * width + v] =
          grid[static_cast<std::size_t>(u) * width + v] > alpha[static_cast<std::size_t>(count)] * noise ? 1 : 0;
    }
  }
  return det;
}

std::vector<std::uint8_t> static_threshold(std::span<const float> values, float tau) {
  if (!std::isfinite(tau)) throw std::invalid_argument("static_threshold: tau must be finite");
  std::vector<std::uint8_t> det(values.size(), 0);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(values.size()); ++i) {
    det[static_cast<std::size_t>(i)] = values[static_cast<std::size_t>(i)] > tau ? 1 : 0;
  }
  return det;
}

std::vector<std::int32_t> build_nearest_polar_lookup(int num_azimuths, int num_range_bins, float range_resolution,
                                                     int height, int width, float cell_size) {
  std::vector<std::int32_t> lookup(static_cast<std::size_t>(height) * width, -1);
#pragma omp parallel for schedule(static)
  for (int u = 0; u < height; ++u) {
    for (int v = 0; v < width; ++v) {
      const double x = (v + 0.5 - width / 2.0) * cell_size;
      const double y = (u + 0.5 - height / 2.0) * cell_size;
      const double r = std::hypot(x, y) / range_resolution;
      const int rb = static_cast<int>(std::lround(r));
      if (rb >= num_range_bins) continue;
      double theta = std::atan2(y, x);
      if (theta < 0) theta += kTwoPi;
      const int a = static_cast<int>(std::lround(theta * num_azimuths / kTwoPi)) % num_azimuths;
      lookup[static_cast<std::size_t>(u) * width + v] = a * num_range_bins + rb;
    }
  }
  return lookup;
}

std::vector<std::uint8_t> polar_mask_to_cart(const std::vector<std::uint8_t>& polar_mask,
                                             const std::vector<std::int32_t>& lookup) {
  std::vector<std::uint8_t> cart(lookup.size(), 0);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(lookup.size()); ++i) {
    const std::int32_t src = lookup[static_cast<std::size_t>(i)];
    if (src >= 0) cart[static_cast<std::size_t>(i)] = polar_mask[static_cast<std::size_t>(src)];
  }
  return cart;
}

const char* method_name(Method m) {
  switch (m) {
    case Method::kCfar1dPolar:
      return "cfar1d";
    case Method::kCfar2dCartesian:
      return "cfar2d";
    case Method::kStaticThreshold:
      return "static";
  }
  return "?";
}

std::string TuneResult::digest() const {
  if (method == Method::kStaticThreshold) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "tau=%g", static_cast<double>(tau));
    return buf;
  }
  return config.digest();
}

std::vector<std::uint8_t> detect(const TuneResult& tuned, const sim::Sample& sample, const grids::PolarCartMap& map,
                                 const std::vector<std::int32_t>& nearest_lookup) {
  switch (tuned.method) {
    case Method::kCfar1dPolar:
      return polar_mask_to_cart(ca_cfar_polar(sample.scan, tuned.config), nearest_lookup);
    case Method::kCfar2dCartesian: {
      const std::vector<float> cart = grids::resample_polar_to_cart(map, sample.scan.power);
      return ca_cfar_2d(cart, map.height, map.width, tuned.config);
    }
    case Method::kStaticThreshold: {
      const std::vector<float> cart = grids::resample_polar_to_cart(map, sample.scan.power);
      return static_threshold(cart, tuned.tau);
    }
  }
  throw std::invalid_argument("detect: unknown method");
}

TuneResult tune(Method method, std::span<const sim::Sample> train, const grids::PolarCartMap& map,
                const std::vector<CfarConfig>& cfar_grid, const std::vector<float>& tau_grid) {
  if (train.empty()) throw std::invalid_argument("tune: empty training dataset");
  const bool is_static = method == Method::kStaticThreshold;
  if (is_static ? tau_grid.empty() : cfar_grid.empty()) throw std::invalid_argument("tune: empty search grid");

  std::vector<std::int32_t> lookup;
  if (method == Method::kCfar1dPolar) {
    const auto& scan = train[0].scan;
    lookup = build_nearest_polar_lookup(scan.num_azimuths, scan.num_range_bins, scan.range_resolution, map.height,
                                        map.width, train[0].world.cell_size);
  }
  std::vector<std::vector<float>> cart_power;
  if (method != Method::kCfar1dPolar) {
    cart_power.resize(train.size());
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(train.size()); ++i) {
      cart_power[static_cast<std::size_t>(i)] =
          grids::resample_polar_to_cart(map, train[static_cast<std::size_t>(i)].scan.power);
    }
  }

  // Candidates sorted so that the first strict maximum realises the
  // tie-break: smaller window first, then smaller Pfa / tau.
  std::vector<CfarConfig> cfgs = cfar_grid;
  std::sort(cfgs.begin(), cfgs.end(), [](const CfarConfig& a, const CfarConfig& b) {
    const int wa = a.num_train_cells + a.num_guard_cells, wb = b.num_train_cells + b.num_guard_cells;
    if (wa != wb) return wa < wb;
    if (a.prob_false_alarm != b.prob_false_alarm) return a.prob_false_alarm < b.prob_false_alarm;
    return a.num_train_cells < b.num_train_cells;
  });
  std::vector<float> taus = tau_grid;
  std::sort(taus.begin(), taus.end());

  TuneResult best;
  best.method = method;
  best.mean_iou = -1.0;
  const std::size_t num_candidates = is_static ? taus.size() : cfgs.size();
  for (std::size_t c = 0; c < num_candidates; ++c) {
    TuneResult cand;
    cand.method = method;
    if (is_static) {
      cand.tau = taus[c];
    } else {
      cand.config = cfgs[c];
    }
    eval::ConfusionCounts counts;
    bool feasible = true;
    for (std::size_t i = 0; i < train.size(); ++i) {
      std::vector<std::uint8_t> mask;
      try {
        switch (method) {
          case Method::kCfar1dPolar:
            mask = polar_mask_to_cart(ca_cfar_polar(train[i].scan, cand.config), lookup);
            break;
          case Method::kCfar2dCartesian:
            mask = ca_cfar_2d(cart_power[i], map.height, map.width, cand.config);
            break;
          case Method::kStaticThreshold:
            mask = static_threshold(cart_power[i], cand.tau);
            break;
        }
      } catch (const std::invalid_argument&) {  // window larger than this raster
        feasible = false;
        break;
      }
      counts.accumulate(mask.data(), train[i].labels);
    }
    if (!feasible || counts.total() == 0) continue;
    cand.mean_iou = eval::iou_from_counts(counts).mean_iou;
    if (cand.mean_iou > best.mean_iou) best = cand;
  }
  if (best.mean_iou < 0.0) throw std::invalid_argument("tune: no feasible candidate in the search grid");
  return best;
}

std::vector<CfarConfig> default_cfar_grid() {
  std::vector<CfarConfig> grid;
  for (int train : {2, 4, 8}) {
    for (int guard : {0, 1, 2}) {
      for (float pfa : {1e-1f, 1e-2f, 1e-3f, 1e-4f}) {
        grid.push_back(CfarConfig{train, guard, pfa});
      }
    }
  }
  return grid;
}

std::vector<float> default_tau_grid(std::span<const sim::Sample> train, const grids::PolarCartMap& map) {
  // quantiles of the Cartesian power of (up to) the first 16 samples
  std::vector<float> pool;
  const std::size_t limit = std::min<std::size_t>(train.size(), 16);
  for (std::size_t i = 0; i < limit; ++i) {
    const std::vector<float> cart = grids::resample_polar_to_cart(map, train[i].scan.power);
    pool.insert(pool.end(), cart.begin(), cart.end());
  }
  std::sort(pool.begin(), pool.end());
  std::vector<float> taus;
  for (double q : {0.5, 0.7, 0.8, 0.9, 0.95, 0.975, 0.99, 0.995}) {
    taus.push_back(pool[static_cast<std::size_t>(q * (pool.size() - 1))]);
  }
  taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
  return taus;
}

}  // namespace rism::cfar
