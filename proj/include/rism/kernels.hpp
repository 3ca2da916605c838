#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <vector>

namespace rism::kernels {

// Dense kernels shared by the network and the detectors. All matrices are
// row-major. Parallel loops split the output into fixed tiles computed
// independently, so results are bit-identical for any thread count.

inline constexpr int kColTile = 512;
inline constexpr int kInnerTile = 64;

// C (m x n) += A (m x k) * B (k x n)
template <typename T>
void gemm_acc(const T* a, const T* b, T* c, int m, int k, int n) {
  const int num_tiles = (n + kColTile - 1) / kColTile;
#pragma omp parallel for schedule(static)
  for (int tile = 0; tile < num_tiles; ++tile) {
    const int j0 = tile * kColTile;
    const int j1 = std::min(j0 + kColTile, n);
    for (int k0 = 0; k0 < k; k0 += kInnerTile) {
      const int k1 = std::min(k0 + kInnerTile, k);
      for (int i = 0; i < m; ++i) {
        T* crow = c + static_cast<std::int64_t>(i) * n;
        for (int kk = k0; kk < k1; ++kk) {
          const T av = a[static_cast<std::int64_t>(i) * k + kk];
          const T* brow = b + static_cast<std::int64_t>(kk) * n;
#pragma omp simd
          for (int j = j0; j < j1; ++j) crow[j] += av * brow[j];
        }
      }
    }
  }
}

// C (m x n) = A (m x k) * B (k x n)
template <typename T>
void gemm(const T* a, const T* b, T* c, int m, int k, int n) {
  std::fill(c, c + static_cast<std::int64_t>(m) * n, T(0));
  gemm_acc(a, b, c, m, k, n);
}

// C (m x n) += A (m x l) * B^T with B stored (n x l): row-by-row dots.
template <typename T>
void gemm_nt_acc(const T* a, const T* b, T* c, int m, int l, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<std::int64_t>(i) * l;
    for (int j = 0; j < n; ++j) {
      const T* brow = b + static_cast<std::int64_t>(j) * l;
      T s = T(0);
#pragma omp simd reduction(+ : s)
      for (int kk = 0; kk < l; ++kk) s += arow[kk] * brow[kk];
      c[static_cast<std::int64_t>(i) * n + j] += s;
    }
  }
}

// Unfolds x (c x h x w) into col ((c*kh*kw) x (h*w)) for a stride-1
// convolution with zero padding (ph, pw) at the top/left and the remainder
// (kh-1-ph, kw-1-pw) at the bottom/right.
template <typename T>
void im2col(const T* x, int c, int h, int w, int kh, int kw, int ph, int pw, T* col) {
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
#pragma omp parallel for schedule(static) collapse(2)
  for (int ci = 0; ci < c; ++ci) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        T* dst = col + ((static_cast<std::int64_t>(ci) * kh + ky) * kw + kx) * plane;
        const T* src = x + static_cast<std::int64_t>(ci) * plane;
        for (int oy = 0; oy < h; ++oy) {
          const int iy = oy - ph + ky;
          if (iy < 0 || iy >= h) {
            std::fill(dst + static_cast<std::int64_t>(oy) * w, dst + (static_cast<std::int64_t>(oy) + 1) * w, T(0));
            continue;
          }
          T* drow = dst + static_cast<std::int64_t>(oy) * w;
          const T* srow = src + static_cast<std::int64_t>(iy) * w;
          for (int ox = 0; ox < w; ++ox) {
            const int ix = ox - pw + kx;
            drow[ox] = (ix >= 0 && ix < w) ? srow[ix] : T(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col as a gather: dx (c x h x w) += fold of dcol.
template <typename T>
void col2im_acc(const T* dcol, int c, int h, int w, int kh, int kw, int ph, int pw, T* dx) {
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
#pragma omp parallel for schedule(static) collapse(2)
  for (int ci = 0; ci < c; ++ci) {
    for (int iy = 0; iy < h; ++iy) {
      T* drow = dx + static_cast<std::int64_t>(ci) * plane + static_cast<std::int64_t>(iy) * w;
      for (int ky = 0; ky < kh; ++ky) {
        const int oy = iy + ph - ky;
        if (oy < 0 || oy >= h) continue;
        for (int kx = 0; kx < kw; ++kx) {
          const T* srow =
              dcol + ((static_cast<std::int64_t>(ci) * kh + ky) * kw + kx) * plane + static_cast<std::int64_t>(oy) * w;
          const int x_lo = std::max(0, kx - pw);
          const int x_hi = std::min(w, w + kx - pw);
          for (int ix = x_lo; ix < x_hi; ++ix) drow[ix] += srow[ix + pw - kx];
        }
      }
    }
  }
}

// 2x2 max pooling with stride 2; ties resolved to the first maximum in
// row-major window order so the backward pass is deterministic.
template <typename T>
void maxpool2(const T* x, int h, int w, T* y, std::uint8_t* argmax) {
  const int oh = h / 2, ow = w / 2;
#pragma omp parallel for schedule(static)
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const int iy = oy * 2, ix = ox * 2;
      T best = x[static_cast<std::int64_t>(iy) * w + ix];
      std::uint8_t which = 0;
      const T cands[3] = {x[static_cast<std::int64_t>(iy) * w + ix + 1],
                          x[(static_cast<std::int64_t>(iy) + 1) * w + ix],
                          x[(static_cast<std::int64_t>(iy) + 1) * w + ix + 1]};
      for (std::uint8_t t = 0; t < 3; ++t) {
        if (cands[t] > best) {
          best = cands[t];
          which = static_cast<std::uint8_t>(t + 1);
        }
      }
      y[static_cast<std::int64_t>(oy) * ow + ox] = best;
      argmax[static_cast<std::int64_t>(oy) * ow + ox] = which;
    }
  }
}

template <typename T>
void maxpool2_backward_acc(const T* dy, const std::uint8_t* argmax, int h, int w, T* dx) {
  const int oh = h / 2, ow = w / 2;
#pragma omp parallel for schedule(static)
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const std::uint8_t which = argmax[static_cast<std::int64_t>(oy) * ow + ox];
      const int iy = oy * 2 + (which >> 1), ix = ox * 2 + (which & 1);
      dx[static_cast<std::int64_t>(iy) * w + ix] += dy[static_cast<std::int64_t>(oy) * ow + ox];
    }
  }
}

template <typename T>
void upsample2_nearest(const T* x, int h, int w, T* y) {
  const int oh = h * 2, ow = w * 2;
#pragma omp parallel for schedule(static)
  for (int oy = 0; oy < oh; ++oy) {
    const T* srow = x + static_cast<std::int64_t>(oy / 2) * w;
    T* drow = y + static_cast<std::int64_t>(oy) * ow;
    for (int ox = 0; ox < ow; ++ox) drow[ox] = srow[ox / 2];
  }
}

template <typename T>
void upsample2_backward_acc(const T* dy, int h, int w, T* dx) {
  const int ow = w * 2;
#pragma omp parallel for schedule(static)
  for (int iy = 0; iy < h; ++iy) {
    T* drow = dx + static_cast<std::int64_t>(iy) * w;
    const T* s0 = dy + static_cast<std::int64_t>(iy * 2) * ow;
    const T* s1 = dy + (static_cast<std::int64_t>(iy * 2) + 1) * ow;
    for (int ix = 0; ix < w; ++ix) {
      drow[ix] += s0[ix * 2] + s0[ix * 2 + 1] + s1[ix * 2] + s1[ix * 2 + 1];
    }
  }
}

}  // namespace rism::kernels
