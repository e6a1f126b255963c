#pragma once

#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pgr/denoisers.hpp"
#include "pgr/error.hpp"
#include "pgr/guidance.hpp"
#include "pgr/linops.hpp"
#include "pgr/random.hpp"
#include "pgr/schedule.hpp"
#include "pgr/tensor.hpp"

namespace pgr {

enum class Method { Idpg, Idbp, PgmLs, Ddpg };
enum class StepSizePolicy { Unit, DdimRatio };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::Idpg: return "idpg";
    case Method::Idbp: return "idbp";
    case Method::PgmLs: return "pgm_ls";
    case Method::Ddpg: return "ddpg";
  }
  return "unknown";
}

inline const char* to_string(StepSizePolicy p) {
  return p == StepSizePolicy::Unit ? "unit" : "ddim-ratio";
}

struct SchemeConfig {
  Method method = Method::Idpg;
  /// eta and c are used as given. Non-empty delta / mu schedules (length T)
  /// override the ones derived from gamma and step_size.
  GuidanceConfig guidance;
  double gamma = 8.0;
  double zeta = 0.5;
  /// Observation noise level; selects the noisy or noiseless delta rule.
  double sigma_e = 0.0;
  std::uint64_t seed = 0;
  int T = 100;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  /// 0: linear schedule over T steps. Otherwise a train_steps schedule respaced to T.
  int train_steps = 0;
  StepSizePolicy step_size = StepSizePolicy::Unit;

  void validate() const {
    if (T < 1) throw ValidationError("T must be >= 1");
    if (!(zeta >= 0.0 && zeta <= 1.0)) throw ValidationError("zeta must lie in [0, 1]");
    if (!(gamma >= 0.0)) throw ValidationError("gamma must be >= 0");
    if (!(sigma_e >= 0.0)) throw ValidationError("sigma_e must be >= 0");
    if (!guidance.delta.empty() && guidance.delta.size() != static_cast<std::size_t>(T)) {
      throw ValidationError("explicit delta schedule must have T entries");
    }
    if (!guidance.mu.empty() && guidance.mu.size() != static_cast<std::size_t>(T)) {
      throw ValidationError("explicit mu schedule must have T entries");
    }
    guidance.validate();
  }
};

/// Everything a run needs per step, indexed by t - 1.
struct ResolvedSchedules {
  DiffusionSchedule diffusion;
  std::vector<double> delta;
  std::vector<double> w;
  std::vector<double> mu;
};

/// mu_t = (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t); mu_1 = 0 since alpha_bar_0 = 1.
inline std::vector<double> step_sizes(const DiffusionSchedule& s, StepSizePolicy policy) {
  std::vector<double> mu(static_cast<std::size_t>(s.steps()), 1.0);
  if (policy == StepSizePolicy::DdimRatio) {
    for (int t = 1; t <= s.steps(); ++t) {
      const auto i = static_cast<std::size_t>(t);
      mu[i - 1] = (1.0 - s.alpha_bar[i - 1]) / (1.0 - s.alpha_bar[i]);
    }
  }
  return mu;
}

inline ResolvedSchedules resolve_schedules(const SchemeConfig& cfg) {
  cfg.validate();
  ResolvedSchedules r;
  r.diffusion = cfg.train_steps > 0
                    ? make_respaced_schedule(cfg.T, cfg.train_steps, cfg.beta_start, cfg.beta_end)
                    : make_ddpm_schedule(cfg.T, cfg.beta_start, cfg.beta_end);
  const auto n = static_cast<std::size_t>(cfg.T);
  switch (cfg.method) {
    case Method::Idbp:
      r.delta.assign(n, 0.0);
      r.w.assign(n, 1.0);
      break;
    case Method::PgmLs:
      r.delta.assign(n, 1.0);
      r.w.assign(n, 1.0);
      break;
    case Method::Idpg:
    case Method::Ddpg: {
      DeltaSchedule d = delta_schedule(r.diffusion.alpha_bar_steps(), cfg.gamma, cfg.sigma_e);
      r.delta = std::move(d.delta);
      r.w = std::move(d.w);
      break;
    }
  }
  if (!cfg.guidance.delta.empty()) {
    r.delta = cfg.guidance.delta;
    if (cfg.sigma_e > 0.0) r.w = r.delta;
  }
  r.mu = cfg.guidance.mu.empty() ? step_sizes(r.diffusion, cfg.step_size) : cfg.guidance.mu;
  return r;
}

struct TraceRecord {
  int t = 0;
  double delta = 0.0;
  /// WLS data term at x_{0|t}.
  double objective = 0.0;
  /// ||A x_{0|t} - y||
  double residual = 0.0;
};

struct RunTrace {
  std::vector<TraceRecord> records;
  /// Final estimate (IDPG: post-guidance x_{0|1}; DDPG: x_0). Not clamped.
  ImageTensor estimate;

  /// One "t delta objective residual" line per step, in run order (t = T..1).
  void write(std::ostream& out) const {
    const auto old_precision = out.precision(17);
    for (const auto& r : records) {
      out << r.t << ' ' << r.delta << ' ' << r.objective << ' ' << r.residual << '\n';
    }
    out.precision(old_precision);
  }
};

struct StepState {
  int t;
  double delta;
  double mu;
  const ImageTensor& x_t;
  const ImageTensor& x0;
  /// x_{0|t} - mu_t g_delta(x_{0|t})
  const ImageTensor& guided;
};

/// Instrumentation for tests and diagnostics.
struct RunHooks {
  std::function<void(const StepState&)> on_step;
  /// Applied to eps_hat before the stochastic update (DDPG only).
  std::function<void(int t, ImageTensor& eps_hat)> perturb_eps_hat;
  /// Replaces the default initialization.
  std::optional<ImageTensor> initial;
};

namespace detail {

inline ImageTensor run_denoiser(const Denoiser& d, const ImageTensor& x, double sigma, int t) {
  try {
    return d(x, sigma);
  } catch (const std::exception& e) {
    throw DenoiserError("denoiser failed at iteration t=" + std::to_string(t) + ": " + e.what());
  }
}

inline ImageTensor guided_step(const ImageTensor& x0, const ImageTensor& grad, double mu) {
  return linear_combination(1.0, x0, -mu, grad);
}

inline void check_run_inputs(const LinearOperator& op, const ImageTensor& y) {
  if (y.shape() != op.output_shape()) {
    throw DimensionError("measurement shape " + y.shape().to_string() + " does not match operator output " +
                         op.output_shape().to_string());
  }
}

inline GuidanceConfig step_guidance(const SchemeConfig& cfg, const ResolvedSchedules& r) {
  GuidanceConfig g = cfg.guidance;
  g.delta = r.delta;
  g.mu = r.mu;
  return g;
}

}  // namespace detail

/// Deterministic iterative denoising with preconditioned guidance:
///   x_{0|t} = D(x_t; sigma_t),  x_{t-1} = x_{0|t} - mu_t g_{delta_t}(x_{0|t}),
/// for t = T..1, starting from the regularized back-projection of y.
/// IDBP (delta = 0) and PGM-LS (delta = 1) are selected through cfg.method.
inline RunTrace idpg_run(const Denoiser& denoiser, const LinearOperator& op, const ImageTensor& y,
                         const SchemeConfig& cfg, const RunHooks& hooks = {}) {
  detail::check_run_inputs(op, y);
  const ResolvedSchedules sched = resolve_schedules(cfg);
  const GuidanceConfig g = detail::step_guidance(cfg, sched);

  ImageTensor x = hooks.initial ? *hooks.initial : apply_reg_pinv(op, y, g.eta);
  detail::require_shape(x, op.input_shape(), "idpg_run initial estimate");

  RunTrace trace;
  trace.records.reserve(static_cast<std::size_t>(cfg.T));
  for (int t = cfg.T; t >= 1; --t) {
    const auto i = static_cast<std::size_t>(t - 1);
    const double delta = sched.delta[i];
    const double mu = sched.mu[i];
    const ImageTensor x0 = detail::run_denoiser(denoiser, x, sched.diffusion.denoiser_sigma(t), t);
    ImageTensor guided = detail::guided_step(x0, g_delta(op, x0, y, delta, g), mu);

    trace.records.push_back(
        {t, delta, wls_objective(op, x0, y, delta, g), norm(apply(op, x0) - y)});
    if (hooks.on_step) hooks.on_step(StepState{t, delta, mu, x, x0, guided});
    x = std::move(guided);
  }
  trace.estimate = std::move(x);
  return trace;
}

/// Stochastic sampling with preconditioned guidance (DDPG).
///
/// RNG order: one child stream "ddpg" of the seed; x_T is drawn first, then
/// one eps_t per step for t = T..1 (drawn even when zeta = 0).
inline RunTrace ddpg_run(const Denoiser& denoiser, const LinearOperator& op, const ImageTensor& y,
                         const SchemeConfig& cfg, const RunHooks& hooks = {}) {
  detail::check_run_inputs(op, y);
  const ResolvedSchedules sched = resolve_schedules(cfg);
  const GuidanceConfig g = detail::step_guidance(cfg, sched);
  const DiffusionSchedule& ds = sched.diffusion;

  RandomStream rng = RandomStream(cfg.seed).split("ddpg");
  ImageTensor x = rng.normal(op.input_shape());
  if (hooks.initial) {
    x = *hooks.initial;
    detail::require_shape(x, op.input_shape(), "ddpg_run initial estimate");
  }

  const double noise_weight = std::sqrt(1.0 - cfg.zeta);
  const double fresh_weight = std::sqrt(cfg.zeta);

  RunTrace trace;
  trace.records.reserve(static_cast<std::size_t>(cfg.T));
  for (int t = cfg.T; t >= 1; --t) {
    const auto i = static_cast<std::size_t>(t - 1);
    const double ab = ds.alpha_bar[static_cast<std::size_t>(t)];
    const double ab_prev = ds.alpha_bar[static_cast<std::size_t>(t - 1)];
    const double delta = sched.delta[i];
    const double mu = sched.mu[i];

    // eps_theta(x_t) = (x_t - sqrt(ab) D(x_t / sqrt(ab); sigma_t)) / sqrt(1 - ab)
    const ImageTensor rescaled = x * (1.0 / std::sqrt(ab));
    const ImageTensor denoised = detail::run_denoiser(denoiser, rescaled, ds.denoiser_sigma(t), t);
    const ImageTensor eps_theta =
        linear_combination(1.0 / std::sqrt(1.0 - ab), x, -std::sqrt(ab) / std::sqrt(1.0 - ab), denoised);
    const ImageTensor x0 = x0_from_eps(x, eps_theta, ab);

    ImageTensor guided = detail::guided_step(x0, g_delta(op, x0, y, delta, g), mu);
    ImageTensor eps_hat = eps_effective(x, guided, ab);
    if (hooks.perturb_eps_hat) hooks.perturb_eps_hat(t, eps_hat);
    const ImageTensor fresh = rng.normal(op.input_shape());

    const ImageTensor injected =
        linear_combination(sched.w[i] * noise_weight, eps_hat, fresh_weight, fresh);
    ImageTensor next = linear_combination(std::sqrt(ab_prev), guided, std::sqrt(1.0 - ab_prev), injected);

    trace.records.push_back(
        {t, delta, wls_objective(op, x0, y, delta, g), norm(apply(op, x0) - y)});
    if (hooks.on_step) hooks.on_step(StepState{t, delta, mu, x, x0, guided});
    x = std::move(next);
  }
  trace.estimate = std::move(x);
  return trace;
}

inline RunTrace run_scheme(const Denoiser& denoiser, const LinearOperator& op, const ImageTensor& y,
                           const SchemeConfig& cfg, const RunHooks& hooks = {}) {
  return cfg.method == Method::Ddpg ? ddpg_run(denoiser, op, y, cfg, hooks)
                                    : idpg_run(denoiser, op, y, cfg, hooks);
}

}  // namespace pgr
