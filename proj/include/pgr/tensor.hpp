#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pgr/error.hpp"

namespace pgr {

/// (channels, height, width); row-major within a channel, channel-major overall.
struct Shape {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const noexcept { return channels * height * width; }
  std::size_t plane_size() const noexcept { return height * width; }
  bool valid() const noexcept { return channels > 0 && height > 0 && width > 0; }

  friend bool operator==(const Shape&, const Shape&) = default;

  std::string to_string() const {
    return "(" + std::to_string(channels) + "," + std::to_string(height) + "," +
           std::to_string(width) + ")";
  }
};

/// Dense real image (or measurement) with value semantics.
///
/// Measurements that are not naturally 2-D (masked pixels, dense-operator
/// outputs) are stored with height 1.
class ImageTensor {
 public:
  ImageTensor() = default;

  explicit ImageTensor(Shape shape, double fill = 0.0) : shape_(shape), data_(shape.size(), fill) {
    check_shape();
  }

  ImageTensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
    check_shape();
    if (data_.size() != shape_.size()) {
      throw DimensionError("tensor data has " + std::to_string(data_.size()) +
                           " values, shape " + shape_.to_string() + " needs " +
                           std::to_string(shape_.size()));
    }
  }

  static ImageTensor zeros_like(const ImageTensor& other) { return ImageTensor(other.shape()); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  std::span<double> channel(std::size_t c) {
    return std::span<double>(data_).subspan(c * shape_.plane_size(), shape_.plane_size());
  }
  std::span<const double> channel(std::size_t c) const {
    return std::span<const double>(data_).subspan(c * shape_.plane_size(), shape_.plane_size());
  }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * shape_.height + y) * shape_.width + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_.height + y) * shape_.width + x];
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  ImageTensor& operator+=(const ImageTensor& o) {
    require_same(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  ImageTensor& operator-=(const ImageTensor& o) {
    require_same(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  ImageTensor& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend ImageTensor operator+(ImageTensor a, const ImageTensor& b) { return a += b; }
  friend ImageTensor operator-(ImageTensor a, const ImageTensor& b) { return a -= b; }
  friend ImageTensor operator*(double s, ImageTensor a) { return a *= s; }
  friend ImageTensor operator*(ImageTensor a, double s) { return a *= s; }

  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

  void require_same(const ImageTensor& o) const {
    if (o.shape_ != shape_) {
      throw DimensionError("shape mismatch: " + shape_.to_string() + " vs " + o.shape_.to_string());
    }
  }

 private:
  void check_shape() const {
    if (!shape_.valid()) {
      throw DimensionError("tensor shape must be strictly positive, got " + shape_.to_string());
    }
  }

  Shape shape_{};
  std::vector<double> data_;
};

inline double dot(const ImageTensor& a, const ImageTensor& b) {
  a.require_same(b);
  auto av = a.values();
  auto bv = b.values();
  return std::inner_product(av.begin(), av.end(), bv.begin(), 0.0);
}

inline double squared_norm(const ImageTensor& a) { return dot(a, a); }
inline double norm(const ImageTensor& a) { return std::sqrt(squared_norm(a)); }

/// y <- y + alpha * x
inline void axpy(double alpha, const ImageTensor& x, ImageTensor& y) {
  y.require_same(x);
  auto xv = x.values();
  auto yv = y.values();
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] += alpha * xv[i];
}

/// alpha * a + beta * b
inline ImageTensor linear_combination(double alpha, const ImageTensor& a, double beta,
                                      const ImageTensor& b) {
  a.require_same(b);
  ImageTensor out(a.shape());
  auto av = a.values();
  auto bv = b.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = alpha * av[i] + beta * bv[i];
  return out;
}

inline double max_abs_diff(const ImageTensor& a, const ImageTensor& b) {
  a.require_same(b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline ImageTensor clamped(ImageTensor x, double lo = 0.0, double hi = 1.0) {
  for (double& v : x.values()) v = std::clamp(v, lo, hi);
  return x;
}

}  // namespace pgr
