#include "rism/grids.hpp"

#include <cmath>
#include <stdexcept>

namespace rism {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void check_finite(const std::vector<float>& v, const char* what) {
  for (float x : v) {
    if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + " contains a non-finite value");
  }
}

}  // namespace

void PolarScan::validate() const {
  if (num_azimuths < 4 || num_range_bins < 4) throw std::invalid_argument("PolarScan needs at least 4x4 bins");
  if (range_resolution <= 0.0f) throw std::invalid_argument("PolarScan range_resolution must be positive");
  if (power.size() != static_cast<std::size_t>(num_azimuths) * num_range_bins)
    throw std::invalid_argument("PolarScan power size mismatch");
  for (float p : power) {
    if (!(p >= 0.0f) || !std::isfinite(p)) throw std::invalid_argument("PolarScan power must be finite and >= 0");
  }
}

void CartesianGrid::validate() const {
  if (height <= 0 || width <= 0) throw std::invalid_argument("CartesianGrid dimensions must be positive");
  if (height % 2 != 0 || width % 2 != 0) throw std::invalid_argument("CartesianGrid dimensions must be even");
  if (cell_size <= 0.0f) throw std::invalid_argument("CartesianGrid cell_size must be positive");
  if (values.size() != static_cast<std::size_t>(height) * width)
    throw std::invalid_argument("CartesianGrid values size mismatch");
  check_finite(values, "CartesianGrid values");
}

void LabelSet::validate() const {
  const std::size_t n = static_cast<std::size_t>(height) * width;
  if (occupancy.size() != n || observability.size() != n) throw std::invalid_argument("LabelSet size mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (occupancy[i] > 1) throw std::invalid_argument("LabelSet occupancy must be 0 or 1");
    if (observability[i] > 2) throw std::invalid_argument("LabelSet observability must be 0, 1 or 2");
  }
}

void WorldSpec::validate() const {
  const std::size_t n = static_cast<std::size_t>(height) * width;
  if (occupancy_truth.size() != n || reflectivity.size() != n) throw std::invalid_argument("WorldSpec size mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (occupancy_truth[i] == 0 && reflectivity[i] != 0.0f)
      throw std::invalid_argument("WorldSpec reflectivity must be zero on free cells");
    if (reflectivity[i] < 0.0f || reflectivity[i] > 1.0f)
      throw std::invalid_argument("WorldSpec reflectivity must lie in [0,1]");
  }
}

namespace grids {

PolarCartMap build_polar_cart_map(int num_azimuths, int num_range_bins, float range_resolution, int height, int width,
                                  float cell_size) {
  if (num_azimuths <= 0 || num_range_bins <= 0 || height <= 0 || width <= 0)
    throw std::invalid_argument("build_polar_cart_map: dimensions must be positive");
  if (range_resolution <= 0.0f || cell_size <= 0.0f)
    throw std::invalid_argument("build_polar_cart_map: resolutions must be positive");

  PolarCartMap map;
  map.num_azimuths = num_azimuths;
  map.num_range_bins = num_range_bins;
  map.height = height;
  map.width = width;
  const std::int64_t n = map.num_cells();
  map.src.assign(static_cast<std::size_t>(n) * 4, 0);
  map.weight.assign(static_cast<std::size_t>(n) * 4, 0.0f);
  map.in_range.assign(static_cast<std::size_t>(n), 0);

#pragma omp parallel for schedule(static)
  for (int u = 0; u < height; ++u) {
    for (int v = 0; v < width; ++v) {
      const std::int64_t cell = static_cast<std::int64_t>(u) * width + v;
      const double x = (v + 0.5 - width / 2.0) * cell_size;
      const double y = (u + 0.5 - height / 2.0) * cell_size;
      const double r = std::hypot(x, y) / range_resolution;
      if (r > num_range_bins - 1) continue;  // beyond the last bin centre

      double theta = std::atan2(y, x);
      if (theta < 0) theta += kTwoPi;
      double a = theta * num_azimuths / kTwoPi;
      if (a >= num_azimuths) a -= num_azimuths;

      const int a0 = static_cast<int>(a);
      const int a1 = (a0 + 1) % num_azimuths;
      const float wa = static_cast<float>(a - a0);
      const int r0 = static_cast<int>(r);
      const int r1 = r0 + 1 < num_range_bins ? r0 + 1 : num_range_bins - 1;
      const float wr = static_cast<float>(r - r0);

      std::uint32_t* s = &map.src[static_cast<std::size_t>(cell) * 4];
      float* w = &map.weight[static_cast<std::size_t>(cell) * 4];
      s[0] = static_cast<std::uint32_t>(a0) * num_range_bins + r0;
      s[1] = static_cast<std::uint32_t>(a0) * num_range_bins + r1;
      s[2] = static_cast<std::uint32_t>(a1) * num_range_bins + r0;
      s[3] = static_cast<std::uint32_t>(a1) * num_range_bins + r1;
      w[0] = (1.0f - wa) * (1.0f - wr);
      w[1] = (1.0f - wa) * wr;
      w[2] = wa * (1.0f - wr);
      w[3] = wa * wr;
      map.in_range[static_cast<std::size_t>(cell)] = 1;
    }
  }
  return map;
}

template <typename T>
void resample_polar_to_cart(const PolarCartMap& map, const T* polar, T* cart) {
  const std::int64_t n = map.num_cells();
#pragma omp parallel for schedule(static)
  for (std::int64_t c = 0; c < n; ++c) {
    if (!map.in_range[static_cast<std::size_t>(c)]) {
      cart[c] = T(0);
      continue;
    }
    const std::uint32_t* s = &map.src[static_cast<std::size_t>(c) * 4];
    const float* w = &map.weight[static_cast<std::size_t>(c) * 4];
    cart[c] = static_cast<T>(w[0]) * polar[s[0]] + static_cast<T>(w[1]) * polar[s[1]] +
              static_cast<T>(w[2]) * polar[s[2]] + static_cast<T>(w[3]) * polar[s[3]];
  }
}

std::vector<float> resample_polar_to_cart(const PolarCartMap& map, const std::vector<float>& polar) {
  if (polar.size() != static_cast<std::size_t>(map.num_azimuths) * map.num_range_bins)
    throw std::invalid_argument("resample_polar_to_cart: polar shape mismatch");
  std::vector<float> cart(static_cast<std::size_t>(map.num_cells()));
  resample_polar_to_cart(map, polar.data(), cart.data());
  return cart;
}

template <typename T>
void resample_backward_acc(const PolarCartMap& map, const T* grad_cart, T* grad_polar) {
  const std::int64_t n = map.num_cells();
  for (std::int64_t c = 0; c < n; ++c) {
    if (!map.in_range[static_cast<std::size_t>(c)]) continue;
    const T g = grad_cart[c];
    if (g == T(0)) continue;
    const std::uint32_t* s = &map.src[static_cast<std::size_t>(c) * 4];
    const float* w = &map.weight[static_cast<std::size_t>(c) * 4];
    grad_polar[s[0]] += static_cast<T>(w[0]) * g;
    grad_polar[s[1]] += static_cast<T>(w[1]) * g;
    grad_polar[s[2]] += static_cast<T>(w[2]) * g;
    grad_polar[s[3]] += static_cast<T>(w[3]) * g;
  }
}

std::vector<float> resample_polar_to_cart_backward(const PolarCartMap& map, const std::vector<float>& grad_cart) {
  if (grad_cart.size() != static_cast<std::size_t>(map.num_cells()))
    throw std::invalid_argument("resample_polar_to_cart_backward: gradient shape mismatch");
  std::vector<float> grad_polar(static_cast<std::size_t>(map.num_azimuths) * map.num_range_bins, 0.0f);
  resample_backward_acc(map, grad_cart.data(), grad_polar.data());
  return grad_polar;
}

std::pair<PolarScan, LabelSet> rotate_pair(const PolarScan& polar, const LabelSet& labels, int angle_bins) {
  const int theta = polar.num_azimuths;
  const int k = ((angle_bins % theta) + theta) % theta;

  PolarScan out_scan = polar;
  for (int a = 0; a < theta; ++a) {
    const int dst = (a + k) % theta;
    std::copy(polar.power.begin() + static_cast<std::size_t>(a) * polar.num_range_bins,
              polar.power.begin() + static_cast<std::size_t>(a + 1) * polar.num_range_bins,
              out_scan.power.begin() + static_cast<std::size_t>(dst) * polar.num_range_bins);
  }

  LabelSet out_labels = labels;
  const double phi = k * kTwoPi / theta;
  const double c = std::cos(phi), s = std::sin(phi);
  const int h = labels.height, w = labels.width;
#pragma omp parallel for schedule(static)
  for (int u = 0; u < h; ++u) {
    for (int v = 0; v < w; ++v) {
      const double x = v + 0.5 - w / 2.0;
      const double y = u + 0.5 - h / 2.0;
      // inverse rotation of the destination cell centre (cell units)
      const double xs = x * c + y * s;
      const double ys = -x * s + y * c;
      const int us = static_cast<int>(std::floor(ys + h / 2.0));
      const int vs = static_cast<int>(std::floor(xs + w / 2.0));
      const std::size_t dst = static_cast<std::size_t>(u) * w + v;
      if (us < 0 || us >= h || vs < 0 || vs >= w) {
        out_labels.occupancy[dst] = 0;
        out_labels.observability[dst] = kUnobserved;
      } else {
        const std::size_t src = static_cast<std::size_t>(us) * w + vs;
        out_labels.occupancy[dst] = labels.occupancy[src];
        out_labels.observability[dst] = labels.observability[src];
      }
    }
  }
  return {std::move(out_scan), std::move(out_labels)};
}

template void resample_polar_to_cart<float>(const PolarCartMap&, const float*, float*);
template void resample_polar_to_cart<double>(const PolarCartMap&, const double*, double*);
template void resample_backward_acc<float>(const PolarCartMap&, const float*, float*);
template void resample_backward_acc<double>(const PolarCartMap&, const double*, double*);

}  // namespace grids
}  // namespace rism
