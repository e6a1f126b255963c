#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <unsupported/Eigen/FFT>

namespace pgr::fft {

using Complex = std::complex<double>;
using Spectrum = std::vector<Complex>;

namespace detail {

// Separable 2-D transform: rows, then columns, one Eigen::FFT per call.
inline void transform2d(Spectrum& data, std::size_t h, std::size_t w, bool inverse) {
  Eigen::FFT<double> engine;
  std::vector<Complex> line_in;
  std::vector<Complex> line_out;

  line_in.resize(w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) line_in[x] = data[y * w + x];
    if (inverse) {
      engine.inv(line_out, line_in);
    } else {
      engine.fwd(line_out, line_in);
    }
    for (std::size_t x = 0; x < w; ++x) data[y * w + x] = line_out[x];
  }

  line_in.resize(h);
  for (std::size_t x = 0; x < w; ++x) {
    for (std::size_t y = 0; y < h; ++y) line_in[y] = data[y * w + x];
    if (inverse) {
      engine.inv(line_out, line_in);
    } else {
      engine.fwd(line_out, line_in);
    }
    for (std::size_t y = 0; y < h; ++y) data[y * w + x] = line_out[y];
  }
}

}  // namespace detail

/// Unnormalized forward DFT of a real h-by-w plane.
inline Spectrum forward(std::span<const double> plane, std::size_t h, std::size_t w) {
  Spectrum s(plane.begin(), plane.end());
  detail::transform2d(s, h, w, false);
  return s;
}

/// Inverse DFT (scaled by 1/(h*w)); returns the real part.
inline std::vector<double> inverse_real(Spectrum s, std::size_t h, std::size_t w) {
  detail::transform2d(s, h, w, true);
  std::vector<double> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i].real();
  return out;
}

inline void inverse_real_into(Spectrum s, std::size_t h, std::size_t w, std::span<double> out) {
  detail::transform2d(s, h, w, true);
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i].real();
}

/// Signed frequency index for bin k of an n-point DFT.
inline long signed_frequency(std::size_t k, std::size_t n) {
  return k <= n / 2 ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(n);
}

}  // namespace pgr::fft
