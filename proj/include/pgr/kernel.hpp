#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "pgr/error.hpp"
#include "pgr/fft.hpp"

namespace pgr {

/// 2-D filter taps, row-major. The anchor (center tap) sits at
/// (height / 2, width / 2); for odd sides that is the geometric center.
struct Kernel {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> taps;

  Kernel() = default;
  Kernel(std::size_t h, std::size_t w, std::vector<double> t) : height(h), width(w), taps(std::move(t)) {
    if (h == 0 || w == 0) throw ValidationError("kernel sides must be positive");
    if (taps.size() != h * w) {
      throw DimensionError("kernel " + std::to_string(h) + "x" + std::to_string(w) + " needs " +
                           std::to_string(h * w) + " taps, got " + std::to_string(taps.size()));
    }
  }

  double operator()(std::size_t y, std::size_t x) const { return taps[y * width + x]; }
  std::size_t anchor_y() const { return height / 2; }
  std::size_t anchor_x() const { return width / 2; }
  bool odd_sides() const { return height % 2 == 1 && width % 2 == 1; }
  double sum() const { return std::accumulate(taps.begin(), taps.end(), 0.0); }
};

inline Kernel delta_kernel() { return Kernel(1, 1, {1.0}); }

/// Sampled isotropic Gaussian clipped to size x size and renormalized to unit sum.
inline Kernel gaussian_kernel(std::size_t size, double stddev) {
  if (size == 0 || size % 2 == 0) throw ValidationError("gaussian kernel size must be odd");
  if (!(stddev > 0.0)) throw ValidationError("gaussian kernel stddev must be positive");
  const double c = static_cast<double>(size / 2);
  std::vector<double> taps(size * size);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double dy = static_cast<double>(y) - c;
      const double dx = static_cast<double>(x) - c;
      taps[y * size + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * stddev * stddev));
    }
  }
  const double s = std::accumulate(taps.begin(), taps.end(), 0.0);
  for (double& t : taps) t /= s;
  return Kernel(size, size, std::move(taps));
}

/// Keys cubic convolution weight with a = -0.5.
inline double cubic_weight(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

/// Separable bicubic anti-aliasing kernel for integer downscaling by `scale`.
/// Support is 4*scale taps per axis, symmetric about the half-pixel before the
/// anchor, normalized to unit sum.
inline Kernel bicubic_kernel(std::size_t scale) {
  if (scale == 0) throw ValidationError("bicubic scale must be positive");
  const std::size_t n = 4 * scale;
  const double s = static_cast<double>(scale);
  std::vector<double> w1(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double offset = static_cast<double>(i) - static_cast<double>(2 * scale) + 0.5;
    w1[i] = cubic_weight(offset / s);
  }
  const double s1 = std::accumulate(w1.begin(), w1.end(), 0.0);
  for (double& v : w1) v /= s1;
  std::vector<double> taps(n * n);
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) taps[y * n + x] = w1[y] * w1[x];
  return Kernel(n, n, std::move(taps));
}

/// Kernel embedded in an h-by-w circular grid with its anchor moved to (0, 0).
/// Taps that fall outside the grid wrap around and accumulate.
inline std::vector<double> circular_embedding(const Kernel& k, std::size_t h, std::size_t w) {
  std::vector<double> grid(h * w, 0.0);
  const long ay = static_cast<long>(k.anchor_y());
  const long ax = static_cast<long>(k.anchor_x());
  const long H = static_cast<long>(h);
  const long W = static_cast<long>(w);
  for (std::size_t y = 0; y < k.height; ++y) {
    for (std::size_t x = 0; x < k.width; ++x) {
      const long gy = ((static_cast<long>(y) - ay) % H + H) % H;
      const long gx = ((static_cast<long>(x) - ax) % W + W) % W;
      grid[static_cast<std::size_t>(gy * W + gx)] += k(y, x);
    }
  }
  return grid;
}

/// Frequency response F(k) of the kernel on an h-by-w grid.
inline fft::Spectrum frequency_response(const Kernel& k, std::size_t h, std::size_t w) {
  return fft::forward(circular_embedding(k, h, w), h, w);
}

}  // namespace pgr
