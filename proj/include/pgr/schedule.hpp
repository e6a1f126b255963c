#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pgr/error.hpp"
#include "pgr/tensor.hpp"

namespace pgr {

/// DDPM noise schedule. beta[t - 1] is beta_t for t = 1..T;
/// alpha_bar[t] is prod_{s <= t} (1 - beta_s) with alpha_bar[0] = 1.
struct DiffusionSchedule {
  std::vector<double> beta;
  std::vector<double> alpha_bar;

  int steps() const { return static_cast<int>(beta.size()); }

  /// alpha_bar_1 .. alpha_bar_T
  std::span<const double> alpha_bar_steps() const {
    return std::span<const double>(alpha_bar).subspan(1);
  }

  /// sqrt(1 - alpha_bar_t): noise std of x_t in the variance-preserving form.
  double noise_std(int t) const { return std::sqrt(1.0 - alpha_bar.at(static_cast<std::size_t>(t))); }

  /// sqrt(1 - alpha_bar_t) / sqrt(alpha_bar_t): noise level after rescaling x_t to unit signal.
  double denoiser_sigma(int t) const {
    const double ab = alpha_bar.at(static_cast<std::size_t>(t));
    return std::sqrt((1.0 - ab) / ab);
  }

  void validate() const {
    if (beta.empty()) throw ValidationError("schedule needs at least one step");
    if (alpha_bar.size() != beta.size() + 1 || alpha_bar[0] != 1.0) {
      throw ValidationError("alpha_bar must have T + 1 entries starting at 1");
    }
    for (std::size_t i = 0; i < beta.size(); ++i) {
      if (!(beta[i] > 0.0 && beta[i] <= 1.0)) throw ValidationError("beta_t must lie in (0, 1]");
      if (i > 0 && beta[i] < beta[i - 1]) throw ValidationError("beta_t must be non-decreasing");
    }
  }
};

namespace detail {

inline std::vector<double> linear_betas(int count, double beta_start, double beta_end) {
  if (count < 1) throw ValidationError("schedule needs T >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end <= 1.0)) {
    throw ValidationError("need 0 < beta_start <= beta_end <= 1, got [" + std::to_string(beta_start) +
                          ", " + std::to_string(beta_end) + "]");
  }
  std::vector<double> b(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    b[static_cast<std::size_t>(i)] =
        count == 1 ? beta_start : beta_start + (beta_end - beta_start) * i / (count - 1);
  }
  return b;
}

inline std::vector<double> cumulative_alpha_bar(const std::vector<double>& beta) {
  std::vector<double> ab(beta.size() + 1, 1.0);
  for (std::size_t i = 0; i < beta.size(); ++i) ab[i + 1] = ab[i] * (1.0 - beta[i]);
  return ab;
}

}  // namespace detail

/// T linearly spaced betas from beta_start to beta_end inclusive.
inline DiffusionSchedule make_ddpm_schedule(int T, double beta_start = 1e-4, double beta_end = 0.02) {
  DiffusionSchedule s;
  s.beta = detail::linear_betas(T, beta_start, beta_end);
  s.alpha_bar = detail::cumulative_alpha_bar(s.beta);
  if (s.alpha_bar.back() <= 0.0) throw ValidationError("alpha_bar_T underflows to zero");
  return s;
}

/// A train_steps-long linear DDPM schedule visited at T evenly skipped steps
/// (the usual accelerated-sampling respacing). Betas are re-derived so that
/// alpha_bar matches the training schedule at the visited steps.
inline DiffusionSchedule make_respaced_schedule(int T, int train_steps, double beta_start = 1e-4,
                                                double beta_end = 0.02) {
  if (train_steps < T) throw ValidationError("train_steps must be >= T");
  const DiffusionSchedule full = make_ddpm_schedule(train_steps, beta_start, beta_end);
  DiffusionSchedule s;
  s.alpha_bar.push_back(1.0);
  for (int i = 1; i <= T; ++i) {
    // Visited training step for sampling step i: round(i * train_steps / T).
    const auto k = static_cast<std::size_t>(
        std::llround(static_cast<double>(i) * train_steps / static_cast<double>(T)));
    s.alpha_bar.push_back(full.alpha_bar[k]);
  }
  for (std::size_t i = 1; i < s.alpha_bar.size(); ++i) {
    s.beta.push_back(1.0 - s.alpha_bar[i] / s.alpha_bar[i - 1]);
  }
  return s;
}

/// x_{0|t} = (x_t - sqrt(1 - alpha_bar_t) eps) / sqrt(alpha_bar_t)
inline ImageTensor x0_from_eps(const ImageTensor& x_t, const ImageTensor& eps, double alpha_bar_t) {
  if (!(alpha_bar_t > 0.0 && alpha_bar_t <= 1.0)) {
    throw ValidationError("alpha_bar_t must lie in (0, 1]");
  }
  return linear_combination(1.0 / std::sqrt(alpha_bar_t), x_t,
                            -std::sqrt(1.0 - alpha_bar_t) / std::sqrt(alpha_bar_t), eps);
}

/// eps_hat = (x_t - sqrt(alpha_bar_t) x_tilde) / sqrt(1 - alpha_bar_t)
inline ImageTensor eps_effective(const ImageTensor& x_t, const ImageTensor& x_tilde, double alpha_bar_t) {
  if (!(alpha_bar_t > 0.0 && alpha_bar_t <= 1.0)) {
    throw ValidationError("alpha_bar_t must lie in (0, 1)");
  }
  if (alpha_bar_t == 1.0) {
    throw ValidationError("eps_effective: alpha_bar_t = 1 leaves no noise to estimate (division by zero)");
  }
  const double inv = 1.0 / std::sqrt(1.0 - alpha_bar_t);
  return linear_combination(inv, x_t, -std::sqrt(alpha_bar_t) * inv, x_tilde);
}

}  // namespace pgr
