#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pgr/error.hpp"
#include "pgr/linops.hpp"
#include "pgr/tensor.hpp"

namespace pgr {

/// Scalars and per-step schedules that define the guidance direction
///   g_delta = (1 - delta) A^T (A A^T + eta I)^-1 (A x - y) + delta c A^T (A x - y).
///
/// Schedules are indexed by step t = 1..T at position t - 1.
struct GuidanceConfig {
  double eta = 0.0;
  double c = 1.0;
  std::vector<double> mu;
  std::vector<double> delta;

  void validate() const {
    if (!(eta >= 0.0) || !std::isfinite(eta)) throw ValidationError("eta must be >= 0");
    if (!(c > 0.0) || !std::isfinite(c)) throw ValidationError("c must be > 0");
    // mu_1 = 0 is legitimate under the ddim-ratio policy.
    for (double m : mu)
      if (!(m >= 0.0) || !std::isfinite(m)) throw ValidationError("step sizes mu_t must be finite and >= 0");
    for (std::size_t i = 0; i < delta.size(); ++i) {
      if (!(delta[i] >= 0.0 && delta[i] <= 1.0)) {
        throw ValidationError("delta_t must lie in [0, 1], got " + std::to_string(delta[i]) +
                              " at t=" + std::to_string(i + 1));
      }
      // delta grows as t decreases toward 0.
      if (i > 0 && delta[i] > delta[i - 1]) {
        throw ValidationError("delta schedule must be non-increasing in t (t=" +
                              std::to_string(i + 1) + ")");
      }
    }
  }
};

namespace detail {

inline void require_unit_interval(double delta) {
  if (!(delta >= 0.0 && delta <= 1.0)) {
    throw ValidationError("delta must lie in [0, 1], got " + std::to_string(delta));
  }
}

}  // namespace detail

/// A^T (A A^T + eta I)^-1 (A x - y)
inline ImageTensor g_bp(const LinearOperator& op, const ImageTensor& x, const ImageTensor& y,
                        double eta) {
  return apply_reg_pinv(op, apply(op, x) - y, eta);
}

/// c A^T (A x - y), the gradient of (c/2) ||A x - y||^2.
inline ImageTensor g_ls(const LinearOperator& op, const ImageTensor& x, const ImageTensor& y,
                        double c) {
  if (!(c > 0.0)) throw ValidationError("g_ls: c must be > 0");
  ImageTensor g = apply_adjoint(op, apply(op, x) - y);
  if (c != 1.0) g *= c;
  return g;
}

/// (1 - delta) g_bp + delta g_ls. The endpoints skip the unused direction.
inline ImageTensor g_delta(const LinearOperator& op, const ImageTensor& x, const ImageTensor& y,
                           double delta, const GuidanceConfig& cfg) {
  detail::require_unit_interval(delta);
  if (delta == 0.0) return g_bp(op, x, y, cfg.eta);
  if (delta == 1.0) return g_ls(op, x, y, cfg.c);
  return linear_combination(1.0 - delta, g_bp(op, x, y, cfg.eta), delta, g_ls(op, x, y, cfg.c));
}

/// 1/2 ||W^{1/2} (A x - y)||^2 with W = (1 - delta)(A A^T + eta I)^-1 + delta c I,
/// evaluated without a matrix square root.
inline double wls_objective(const LinearOperator& op, const ImageTensor& x, const ImageTensor& y,
                            double delta, const GuidanceConfig& cfg) {
  detail::require_unit_interval(delta);
  const ImageTensor r = apply(op, x) - y;
  double value = 0.0;
  if (delta != 1.0) value += (1.0 - delta) * dot(r, apply_gram_inverse(op, r, cfg.eta));
  if (delta != 0.0) value += delta * cfg.c * squared_norm(r);
  return std::max(0.0, 0.5 * value);
}

struct DeltaSchedule {
  std::vector<double> delta;
  /// Weight on the effective predicted noise in the stochastic scheme.
  std::vector<double> w;
};

/// delta_t = alpha_bar_t^gamma and w_t = delta_t when the observation is
/// noisy; delta_t = 0 and w_t = 1 when it is noiseless.
inline DeltaSchedule delta_schedule(std::span<const double> alpha_bar, double gamma, double sigma_e) {
  if (!(gamma >= 0.0)) throw ValidationError("gamma must be >= 0");
  if (!(sigma_e >= 0.0)) throw ValidationError("sigma_e must be >= 0");
  for (std::size_t i = 0; i < alpha_bar.size(); ++i) {
    if (!(alpha_bar[i] > 0.0 && alpha_bar[i] <= 1.0)) {
      throw ValidationError("alpha_bar must lie in (0, 1], got " + std::to_string(alpha_bar[i]) +
                            " at index " + std::to_string(i));
    }
  }
  DeltaSchedule s;
  s.delta.resize(alpha_bar.size());
  s.w.resize(alpha_bar.size());
  for (std::size_t i = 0; i < alpha_bar.size(); ++i) {
    if (sigma_e > 0.0) {
      s.delta[i] = std::clamp(std::pow(alpha_bar[i], gamma), 0.0, 1.0);
      s.w[i] = s.delta[i];
    } else {
      s.delta[i] = 0.0;
      s.w[i] = 1.0;
    }
  }
  return s;
}

/// eta = max(1e-4, (2 sigma_e)^2 eta_tilde)
inline double eta_from_noise(double sigma_e, double eta_tilde) {
  if (!(sigma_e >= 0.0) || !(eta_tilde >= 0.0)) {
    throw ValidationError("eta_from_noise: sigma_e and eta_tilde must be >= 0");
  }
  return std::max(1e-4, 4.0 * sigma_e * sigma_e * eta_tilde);
}

/// c = 1 unless the largest singular value exceeds 1, then 1 / lambda_1^2.
inline double default_ls_scale(const LinearOperator& op) {
  const double lambda1 = estimate_largest_singular_value(op, 50);
  return lambda1 > 1.0 + 1e-9 ? 1.0 / (lambda1 * lambda1) : 1.0;
}

}  // namespace pgr
