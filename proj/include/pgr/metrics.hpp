#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

#include "pgr/error.hpp"
#include "pgr/linops.hpp"
#include "pgr/random.hpp"
#include "pgr/tensor.hpp"

namespace pgr {

struct NoiseSpec {
  double sigma_e = 0.0;
  std::uint64_t seed = 0;
};

/// y = A x* + sigma_e g, g standard normal from the "degrade" child stream of the seed.
inline ImageTensor degrade(const LinearOperator& op, const ImageTensor& x_star, const NoiseSpec& noise) {
  if (!(noise.sigma_e >= 0.0) || !std::isfinite(noise.sigma_e)) {
    throw ValidationError("noise sigma_e must be finite and >= 0");
  }
  ImageTensor y = apply(op, x_star);
  if (noise.sigma_e > 0.0) {
    RandomStream rng = RandomStream(noise.seed).split("degrade");
    for (double& v : y.values()) v += noise.sigma_e * rng.normal();
  }
  return y;
}

inline double mse(const ImageTensor& x, const ImageTensor& ref) {
  x.require_same(ref);
  return squared_norm(x - ref) / static_cast<double>(x.size());
}

/// +infinity when the images are identical.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// 10 log10(peak^2 / MSE) in dB; no clamping.
inline double psnr(const ImageTensor& x, const ImageTensor& ref, double peak = 1.0) {
  if (!(peak > 0.0)) throw ValidationError("psnr peak must be positive");
  const double e = mse(x, ref);
  if (e == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(peak * peak / e);
}

}  // namespace pgr
