#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "pgr/error.hpp"
#include "pgr/fft.hpp"
#include "pgr/kernel.hpp"
#include "pgr/random.hpp"
#include "pgr/tensor.hpp"

namespace pgr {

/// |F(k)|^2 (or the Gram response) below this counts as an exact spectral zero.
inline constexpr double kSpectralZeroThreshold = 1e-12;

enum class OperatorKind { CircularConvolution, DownsampleConvolution, Mask, Dense };

inline const char* to_string(OperatorKind k) {
  switch (k) {
    case OperatorKind::CircularConvolution: return "circular_convolution";
    case OperatorKind::DownsampleConvolution: return "downsample_convolution";
    case OperatorKind::Mask: return "mask";
    case OperatorKind::Dense: return "dense";
  }
  return "unknown";
}

namespace detail {

inline void require_nonneg_eta(double eta) {
  if (!(eta >= 0.0) || !std::isfinite(eta)) {
    throw ValidationError("regularization eta must be finite and >= 0, got " + std::to_string(eta));
  }
}

/// Count of responses that make eta = 0 inversion singular.
template <class Range, class Magnitude>
void require_invertible(const Range& response, Magnitude magnitude, double eta, const char* what) {
  if (eta > 0.0) return;
  std::size_t zeros = 0;
  for (const auto& r : response)
    if (magnitude(r) < kSpectralZeroThreshold) ++zeros;
  if (zeros > 0) {
    throw SingularityError(std::string(what) + ": exact inversion (eta = 0) is singular at " +
                               std::to_string(zeros) + " frequencies",
                           zeros);
  }
}

/// Applies a per-frequency multiplier to every channel of x on an h-by-w grid.
template <class Multiplier>
ImageTensor filter_channels(const ImageTensor& x, Multiplier&& multiplier) {
  const std::size_t h = x.shape().height;
  const std::size_t w = x.shape().width;
  ImageTensor out(x.shape());
  for (std::size_t c = 0; c < x.shape().channels; ++c) {
    fft::Spectrum s = fft::forward(x.channel(c), h, w);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = multiplier(i, s[i]);
    fft::inverse_real_into(std::move(s), h, w, out.channel(c));
  }
  return out;
}

}  // namespace detail

/// Deblurring: A x = x (*) k with circular boundaries; square (m = n).
class CircularConvolution {
 public:
  CircularConvolution(Kernel kernel, Shape image_shape)
      : kernel_(std::move(kernel)), shape_(image_shape) {
    if (!shape_.valid()) throw DimensionError("invalid image shape " + shape_.to_string());
    if (!kernel_.odd_sides()) {
      throw ValidationError("deblurring kernel must have odd side lengths, got " +
                            std::to_string(kernel_.height) + "x" + std::to_string(kernel_.width));
    }
    response_ = frequency_response(kernel_, shape_.height, shape_.width);
  }

  const Kernel& kernel() const { return kernel_; }
  const Shape& input_shape() const { return shape_; }
  const Shape& output_shape() const { return shape_; }
  const fft::Spectrum& response() const { return response_; }

  ImageTensor apply(const ImageTensor& x) const {
    return detail::filter_channels(x, [&](std::size_t i, fft::Complex v) { return v * response_[i]; });
  }

  ImageTensor adjoint(const ImageTensor& r) const {
    return detail::filter_channels(
        r, [&](std::size_t i, fft::Complex v) { return v * std::conj(response_[i]); });
  }

  ImageTensor gram_inverse(const ImageTensor& r, double eta) const {
    check(eta);
    return detail::filter_channels(
        r, [&](std::size_t i, fft::Complex v) { return v / (std::norm(response_[i]) + eta); });
  }

  /// F^-1( conj(F(k)) F(z) / (|F(k)|^2 + eta) )
  ImageTensor reg_pinv(const ImageTensor& z, double eta) const {
    check(eta);
    return detail::filter_channels(z, [&](std::size_t i, fft::Complex v) {
      return std::conj(response_[i]) * v / (std::norm(response_[i]) + eta);
    });
  }

 private:
  void check(double eta) const {
    detail::require_nonneg_eta(eta);
    detail::require_invertible(response_, [](const fft::Complex& c) { return std::norm(c); }, eta,
                               "circular convolution");
  }

  Kernel kernel_;
  Shape shape_;
  fft::Spectrum response_;
};

/// Super-resolution: A = S B, circular filtering by k followed by keeping
/// every scale-th pixel (offset 0) along both axes.
class DownsampleConvolution {
 public:
  DownsampleConvolution(Kernel kernel, std::size_t scale, Shape image_shape)
      : kernel_(std::move(kernel)), scale_(scale), in_(image_shape) {
    if (!in_.valid()) throw DimensionError("invalid image shape " + in_.to_string());
    if (scale_ == 0) throw ValidationError("scale factor must be positive");
    if (in_.height % scale_ != 0 || in_.width % scale_ != 0) {
      throw DimensionError("image sides " + in_.to_string() + " not divisible by scale " +
                           std::to_string(scale_));
    }
    out_ = Shape{in_.channels, in_.height / scale_, in_.width / scale_};
    response_ = frequency_response(kernel_, in_.height, in_.width);

    // k0 = [F^-1(|F(k)|^2)] subsampled by s: the filter implemented by A A^T.
    fft::Spectrum power(response_.size());
    for (std::size_t i = 0; i < power.size(); ++i) power[i] = std::norm(response_[i]);
    const std::vector<double> autocorr = fft::inverse_real(std::move(power), in_.height, in_.width);
    gram_kernel_.assign(out_.plane_size(), 0.0);
    for (std::size_t y = 0; y < out_.height; ++y)
      for (std::size_t x = 0; x < out_.width; ++x)
        gram_kernel_[y * out_.width + x] = autocorr[(y * scale_) * in_.width + x * scale_];
    const fft::Spectrum g = fft::forward(gram_kernel_, out_.height, out_.width);
    gram_response_.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) gram_response_[i] = g[i].real();
  }

  const Kernel& kernel() const { return kernel_; }
  std::size_t scale() const { return scale_; }
  const Shape& input_shape() const { return in_; }
  const Shape& output_shape() const { return out_; }
  /// k0 on the low-resolution grid, anchor at (0, 0).
  const std::vector<double>& gram_kernel() const { return gram_kernel_; }
  /// F(k0); real and nonnegative up to rounding.
  const std::vector<double>& gram_response() const { return gram_response_; }

  ImageTensor apply(const ImageTensor& x) const {
    const ImageTensor blurred =
        detail::filter_channels(x, [&](std::size_t i, fft::Complex v) { return v * response_[i]; });
    ImageTensor out(out_);
    for (std::size_t c = 0; c < out_.channels; ++c)
      for (std::size_t y = 0; y < out_.height; ++y)
        for (std::size_t x2 = 0; x2 < out_.width; ++x2)
          out.at(c, y, x2) = blurred.at(c, y * scale_, x2 * scale_);
    return out;
  }

  ImageTensor adjoint(const ImageTensor& r) const { return adjoint_of(r); }

  ImageTensor gram_inverse(const ImageTensor& r, double eta) const {
    check(eta);
    return detail::filter_channels(
        r, [&](std::size_t i, fft::Complex v) { return v / (gram_response_[i] + eta); });
  }

  /// F^-1( conj(F(k)) F( [F^-1( F(z) / (F(k0) + eta) )] upsampled ) )
  ImageTensor reg_pinv(const ImageTensor& z, double eta) const {
    return adjoint_of(gram_inverse(z, eta));
  }

 private:
  ImageTensor adjoint_of(const ImageTensor& r) const {
    ImageTensor up(in_);
    for (std::size_t c = 0; c < out_.channels; ++c)
      for (std::size_t y = 0; y < out_.height; ++y)
        for (std::size_t x = 0; x < out_.width; ++x) up.at(c, y * scale_, x * scale_) = r.at(c, y, x);
    return detail::filter_channels(
        up, [&](std::size_t i, fft::Complex v) { return v * std::conj(response_[i]); });
  }

  void check(double eta) const {
    detail::require_nonneg_eta(eta);
    detail::require_invertible(gram_response_, [](double g) { return g; }, eta,
                               "downsample convolution");
  }

  Kernel kernel_;
  std::size_t scale_;
  Shape in_;
  Shape out_;
  fft::Spectrum response_;
  std::vector<double> gram_kernel_;
  std::vector<double> gram_response_;
};

/// Inpainting: keeps the pixels where the mask is set, in every channel.
/// Output shape is (channels, 1, kept). A A^T = I, so A^+ = A^T.
class MaskOperator {
 public:
  MaskOperator(std::vector<std::uint8_t> mask, Shape image_shape) : in_(image_shape) {
    if (!in_.valid()) throw DimensionError("invalid image shape " + in_.to_string());
    if (mask.size() != in_.plane_size()) {
      throw DimensionError("mask has " + std::to_string(mask.size()) + " entries, image plane has " +
                           std::to_string(in_.plane_size()));
    }
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) kept_.push_back(i);
    if (kept_.empty()) throw ValidationError("mask keeps no pixels");
    mask_ = std::move(mask);
    out_ = Shape{in_.channels, 1, kept_.size()};
  }

  const std::vector<std::uint8_t>& mask() const { return mask_; }
  const std::vector<std::size_t>& kept_indices() const { return kept_; }
  const Shape& input_shape() const { return in_; }
  const Shape& output_shape() const { return out_; }

  ImageTensor apply(const ImageTensor& x) const {
    ImageTensor out(out_);
    for (std::size_t c = 0; c < in_.channels; ++c) {
      auto src = x.channel(c);
      auto dst = out.channel(c);
      for (std::size_t j = 0; j < kept_.size(); ++j) dst[j] = src[kept_[j]];
    }
    return out;
  }

  ImageTensor adjoint(const ImageTensor& r) const {
    ImageTensor out(in_);
    for (std::size_t c = 0; c < in_.channels; ++c) {
      auto src = r.channel(c);
      auto dst = out.channel(c);
      for (std::size_t j = 0; j < kept_.size(); ++j) dst[kept_[j]] = src[j];
    }
    return out;
  }

  ImageTensor gram_inverse(const ImageTensor& r, double eta) const {
    detail::require_nonneg_eta(eta);
    return r * (1.0 / (1.0 + eta));
  }

  ImageTensor reg_pinv(const ImageTensor& z, double eta) const {
    detail::require_nonneg_eta(eta);
    ImageTensor out = adjoint(z);
    if (eta != 0.0) out *= 1.0 / (1.0 + eta);
    return out;
  }

 private:
  Shape in_;
  Shape out_;
  std::vector<std::uint8_t> mask_;
  std::vector<std::size_t> kept_;
};

/// Explicit m-by-n matrix acting on the flattened input (test-scale oracle substrate).
class DenseOperator {
 public:
  static constexpr std::size_t kMaxInputSize = 4096;

  DenseOperator(Eigen::MatrixXd matrix, Shape input_shape)
      : matrix_(std::move(matrix)), in_(input_shape) {
    if (!in_.valid()) throw DimensionError("invalid input shape " + in_.to_string());
    const auto m = static_cast<std::size_t>(matrix_.rows());
    const auto n = static_cast<std::size_t>(matrix_.cols());
    if (n != in_.size()) {
      throw DimensionError("matrix has " + std::to_string(n) + " columns, input shape " +
                           in_.to_string() + " has " + std::to_string(in_.size()) + " entries");
    }
    if (m == 0 || m > n) {
      throw ValidationError("dense operator needs 0 < m <= n, got m=" + std::to_string(m) +
                            " n=" + std::to_string(n));
    }
    if (n > kMaxInputSize) throw ValidationError("dense operator limited to n <= 4096");
    out_ = Shape{1, 1, m};
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(matrix_, Eigen::ComputeThinU | Eigen::ComputeThinV);
    u_ = svd.matrixU();
    v_ = svd.matrixV();
    singular_values_ = svd.singularValues();
  }

  explicit DenseOperator(Eigen::MatrixXd matrix)
      : DenseOperator(matrix, Shape{1, 1, static_cast<std::size_t>(matrix.cols())}) {}

  const Eigen::MatrixXd& matrix() const { return matrix_; }
  const Eigen::VectorXd& singular_values() const { return singular_values_; }
  const Shape& input_shape() const { return in_; }
  const Shape& output_shape() const { return out_; }

  ImageTensor apply(const ImageTensor& x) const { return to_tensor(matrix_ * view(x), out_); }
  ImageTensor adjoint(const ImageTensor& r) const {
    return to_tensor(matrix_.transpose() * view(r), in_);
  }

  ImageTensor gram_inverse(const ImageTensor& r, double eta) const {
    check(eta);
    const Eigen::ArrayXd d = 1.0 / (singular_values_.array().square() + eta);
    return to_tensor(u_ * (d.matrix().asDiagonal() * (u_.transpose() * view(r))), out_);
  }

  /// V diag(s / (s^2 + eta)) U^T z
  ImageTensor reg_pinv(const ImageTensor& z, double eta) const {
    check(eta);
    const Eigen::ArrayXd s = singular_values_.array();
    const Eigen::ArrayXd d = s / (s.square() + eta);
    return to_tensor(v_ * (d.matrix().asDiagonal() * (u_.transpose() * view(z))), in_);
  }

 private:
  static Eigen::Map<const Eigen::VectorXd> view(const ImageTensor& t) {
    return {t.values().data(), static_cast<Eigen::Index>(t.size())};
  }
  static ImageTensor to_tensor(const Eigen::VectorXd& v, Shape shape) {
    return ImageTensor(shape, std::vector<double>(v.data(), v.data() + v.size()));
  }

  void check(double eta) const {
    detail::require_nonneg_eta(eta);
    std::vector<double> sq(static_cast<std::size_t>(singular_values_.size()));
    for (Eigen::Index i = 0; i < singular_values_.size(); ++i)
      sq[static_cast<std::size_t>(i)] = singular_values_[i] * singular_values_[i];
    detail::require_invertible(sq, [](double g) { return g; }, eta, "dense operator");
  }

  Eigen::MatrixXd matrix_;
  Shape in_;
  Shape out_;
  Eigen::MatrixXd u_;
  Eigen::MatrixXd v_;
  Eigen::VectorXd singular_values_;
};

/// Immutable observation operator A. Copies share the underlying state.
class LinearOperator {
 public:
  using Variant = std::variant<CircularConvolution, DownsampleConvolution, MaskOperator, DenseOperator>;

  template <class Impl>
    requires std::is_constructible_v<Variant, Impl>
  LinearOperator(Impl impl)  // NOLINT(google-explicit-constructor)
      : impl_(std::make_shared<const Variant>(std::move(impl))) {}

  OperatorKind kind() const { return static_cast<OperatorKind>(impl_->index()); }

  const Shape& input_shape() const {
    return std::visit([](const auto& a) -> const Shape& { return a.input_shape(); }, *impl_);
  }
  const Shape& output_shape() const {
    return std::visit([](const auto& a) -> const Shape& { return a.output_shape(); }, *impl_);
  }

  template <class T>
  const T* as() const {
    return std::get_if<T>(impl_.get());
  }

  template <class F>
  decltype(auto) visit(F&& f) const {
    return std::visit(std::forward<F>(f), *impl_);
  }

 private:
  std::shared_ptr<const Variant> impl_;
};

namespace detail {

inline void require_shape(const ImageTensor& t, const Shape& expected, const char* what) {
  if (t.shape() != expected) {
    throw DimensionError(std::string(what) + ": expected shape " + expected.to_string() + ", got " +
                         t.shape().to_string());
  }
}

}  // namespace detail

/// A x
inline ImageTensor apply(const LinearOperator& op, const ImageTensor& x) {
  detail::require_shape(x, op.input_shape(), "apply");
  return op.visit([&](const auto& a) { return a.apply(x); });
}

/// A^T r
inline ImageTensor apply_adjoint(const LinearOperator& op, const ImageTensor& r) {
  detail::require_shape(r, op.output_shape(), "apply_adjoint");
  return op.visit([&](const auto& a) { return a.adjoint(r); });
}

/// (A A^T + eta I)^-1 r, in measurement space.
inline ImageTensor apply_gram_inverse(const LinearOperator& op, const ImageTensor& r, double eta) {
  detail::require_shape(r, op.output_shape(), "apply_gram_inverse");
  return op.visit([&](const auto& a) { return a.gram_inverse(r, eta); });
}

/// A^T (A A^T + eta I)^-1 z, using the operator's closed form.
inline ImageTensor apply_reg_pinv(const LinearOperator& op, const ImageTensor& z, double eta) {
  detail::require_shape(z, op.output_shape(), "apply_reg_pinv");
  return op.visit([&](const auto& a) { return a.reg_pinv(z, eta); });
}

/// (A A^T + eta I) r via one forward and one adjoint application.
inline ImageTensor apply_gram(const LinearOperator& op, const ImageTensor& r, double eta) {
  ImageTensor out = apply(op, apply_adjoint(op, r));
  if (eta != 0.0) axpy(eta, r, out);
  return out;
}

/// Largest singular value of A by power iteration on A^T A.
inline double estimate_largest_singular_value(const LinearOperator& op, int iterations = 50,
                                              std::uint64_t seed = 0x5eed) {
  RandomStream rng(seed);
  ImageTensor v = rng.normal(op.input_shape());
  v *= 1.0 / norm(v);
  double rayleigh = 0.0;
  for (int i = 0; i < iterations; ++i) {
    ImageTensor w = apply_adjoint(op, apply(op, v));
    rayleigh = dot(v, w);
    const double n = norm(w);
    if (n == 0.0) return 0.0;
    v = w * (1.0 / n);
  }
  return std::sqrt(std::max(rayleigh, 0.0));
}

}  // namespace pgr
