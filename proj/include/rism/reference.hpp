#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace rism::ref {

// Serial scalar-loop reference implementations. These are the oracles the
// unit tests compare the OpenMP kernels against, and the baseline side of
// the benchmark target. They share no code with rism::kernels / rism::grids
// and favour obviousness over speed.

template <typename T>
void gemm(const T* a, const T* b, T* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      T s = T(0);
      for (int kk = 0; kk < k; ++kk) {
        s += a[static_cast<std::int64_t>(i) * k + kk] * b[static_cast<std::int64_t>(kk) * n + j];
      }
      c[static_cast<std::int64_t>(i) * n + j] = s;
    }
  }
}

// Direct stride-1 convolution, zero padding (ph, pw) at top/left.
// x: (cin, h, w), wgt: (cout, cin, kh, kw), bias: (cout), y: (cout, h, w).
template <typename T>
void conv2d(const T* x, const T* wgt, const T* bias, int cin, int h, int w, int cout, int kh, int kw, int ph, int pw,
            T* y) {
  for (int co = 0; co < cout; ++co) {
    for (int oy = 0; oy < h; ++oy) {
      for (int ox = 0; ox < w; ++ox) {
        T s = bias ? bias[co] : T(0);
        for (int ci = 0; ci < cin; ++ci) {
          for (int ky = 0; ky < kh; ++ky) {
            const int iy = oy - ph + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < kw; ++kx) {
              const int ix = ox - pw + kx;
              if (ix < 0 || ix >= w) continue;
              s += x[(static_cast<std::int64_t>(ci) * h + iy) * w + ix] *
                   wgt[((static_cast<std::int64_t>(co) * cin + ci) * kh + ky) * kw + kx];
            }
          }
        }
        y[(static_cast<std::int64_t>(co) * h + oy) * w + ox] = s;
      }
    }
  }
}

// Polar-to-Cartesian resampling recomputed per cell from trigonometry;
// bilinear over (azimuth, range) with the azimuth wrapped modulo the scan.
template <typename T>
void resample_polar_to_cart(const T* polar, int num_azimuths, int num_range_bins, double range_resolution, int height,
                            int width, double cell_size, T* cart) {
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  for (int u = 0; u < height; ++u) {
    for (int v = 0; v < width; ++v) {
      const double x = (v + 0.5 - width / 2.0) * cell_size;
      const double y = (u + 0.5 - height / 2.0) * cell_size;
      const double r = std::hypot(x, y) / range_resolution;
      if (r > num_range_bins - 1) {
        cart[static_cast<std::int64_t>(u) * width + v] = T(0);
        continue;
      }
      double theta = std::atan2(y, x);
      if (theta < 0) theta += kTwoPi;
      double a = theta * num_azimuths / kTwoPi;
      if (a >= num_azimuths) a -= num_azimuths;
      const int a0 = static_cast<int>(a);
      const int a1 = (a0 + 1) % num_azimuths;
      const double wa = a - a0;
      int r0 = static_cast<int>(r);
      int r1 = r0 + 1 < num_range_bins ? r0 + 1 : num_range_bins - 1;
      const double wr = r - r0;
      const auto at = [&](int az, int rb) {
        return static_cast<double>(polar[static_cast<std::int64_t>(az) * num_range_bins + rb]);
      };
      const double val = (1 - wa) * (1 - wr) * at(a0, r0) + (1 - wa) * wr * at(a0, r1) + wa * (1 - wr) * at(a1, r0) +
                         wa * wr * at(a1, r1);
      cart[static_cast<std::int64_t>(u) * width + v] = static_cast<T>(val);
    }
  }
}

// Cell-averaging CFAR in 1D, direct window loops. Training cells flank the
// guard cells on both sides; windows are clipped at the edges and the
// threshold factor recomputed from the surviving training-cell count.
inline std::vector<std::uint8_t> ca_cfar_1d(const float* x, int n, int train, int guard, double pfa) {
  std::vector<std::uint8_t> det(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    double sum = 0;
    int count = 0;
    for (int d = guard + 1; d <= guard + train; ++d) {
      if (i - d >= 0) {
        sum += x[i - d];
        ++count;
      }
      if (i + d < n) {
        sum += x[i + d];
        ++count;
      }
    }
    if (count == 0) continue;
    const double noise = sum / count;
    const double alpha = count * (std::pow(pfa, -1.0 / count) - 1.0);
    det[static_cast<std::size_t>(i)] = x[i] > alpha * noise ? 1 : 0;
  }
  return det;
}

// 2D variant: square training ring of width `train` outside a square guard
// ring of half-width `guard` around the cell under test.
inline std::vector<std::uint8_t> ca_cfar_2d(const float* x, int h, int w, int train, int guard, double pfa) {
  std::vector<std::uint8_t> det(static_cast<std::size_t>(h) * w, 0);
  for (int u = 0; u < h; ++u) {
    for (int v = 0; v < w; ++v) {
      double sum = 0;
      int count = 0;
      for (int du = -(guard + train); du <= guard + train; ++du) {
        for (int dv = -(guard + train); dv <= guard + train; ++dv) {
          if (std::abs(du) <= guard && std::abs(dv) <= guard) continue;
          const int uu = u + du, vv = v + dv;
          if (uu < 0 || uu >= h || vv < 0 || vv >= w) continue;
          sum += x[static_cast<std::int64_t>(uu) * w + vv];
          ++count;
        }
      }
      if (count == 0) continue;
      const double noise = sum / count;
      const double alpha = count * (std::pow(pfa, -1.0 / count) - 1.0);
      det[static_cast<std::size_t>(u) * w + v] = x[static_cast<std::int64_t>(u) * w + v] > alpha * noise ? 1 : 0;
    }
  }
  return det;
}

}  // namespace rism::ref
