#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <stdlib.h>    // mkdtemp
#include <sys/wait.h>  // WIFEXITED

#include "pgr/error.hpp"
#include "pgr/fft.hpp"
#include "pgr/io.hpp"
#include "pgr/kernel.hpp"
#include "pgr/linops.hpp"
#include "pgr/random.hpp"
#include "pgr/tensor.hpp"

namespace pgr {

/// Gaussian prior on each image channel: mean image plus a stationary
/// covariance whose eigenvalues in the unitary DFT basis are power(f).
struct WienerPrior {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> power;
  /// Empty means zero mean; otherwise one plane shared by all channels.
  std::vector<double> mean;

  /// power(f) = amplitude / (1 + |f|^2), f the signed integer frequency.
  static WienerPrior power_law(std::size_t h, std::size_t w, double amplitude = 1.0) {
    if (h == 0 || w == 0) throw ValidationError("prior grid must be non-empty");
    if (!(amplitude > 0.0)) throw ValidationError("prior amplitude must be positive");
    WienerPrior p;
    p.height = h;
    p.width = w;
    p.power.resize(h * w);
    for (std::size_t ky = 0; ky < h; ++ky) {
      const double fy = static_cast<double>(fft::signed_frequency(ky, h));
      for (std::size_t kx = 0; kx < w; ++kx) {
        const double fx = static_cast<double>(fft::signed_frequency(kx, w));
        p.power[ky * w + kx] = amplitude / (1.0 + fx * fx + fy * fy);
      }
    }
    return p;
  }

  WienerPrior with_constant_mean(double value) const {
    WienerPrior p = *this;
    p.mean.assign(height * width, value);
    return p;
  }

  void validate() const {
    if (power.size() != height * width) throw ValidationError("prior power spectrum size mismatch");
    if (!mean.empty() && mean.size() != height * width) throw ValidationError("prior mean size mismatch");
    for (std::size_t ky = 0; ky < height; ++ky) {
      for (std::size_t kx = 0; kx < width; ++kx) {
        const double v = power[ky * width + kx];
        if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("prior power must be finite and >= 0");
        const std::size_t ny = (height - ky) % height;
        const std::size_t nx = (width - kx) % width;
        if (std::abs(v - power[ny * width + nx]) > 1e-12 * std::max(1.0, std::abs(v))) {
          throw ValidationError("prior power must be symmetric under frequency negation");
        }
      }
    }
  }

  /// One draw per channel.
  ImageTensor sample(std::size_t channels, RandomStream& rng) const {
    const Shape shape{channels, height, width};
    ImageTensor white = rng.normal(shape);
    // Unitary-DFT covariance diag(power) == filtering white noise by sqrt(power).
    ImageTensor out = detail::filter_channels(
        white, [&](std::size_t i, fft::Complex v) { return v * std::sqrt(power[i]); });
    if (!mean.empty()) {
      for (std::size_t c = 0; c < channels; ++c) {
        auto plane = out.channel(c);
        for (std::size_t i = 0; i < plane.size(); ++i) plane[i] += mean[i];
      }
    }
    return out;
  }
};

enum class DenoiserKind { Identity, GaussianSmooth, WienerMmse, External, Custom };

inline const char* to_string(DenoiserKind k) {
  switch (k) {
    case DenoiserKind::Identity: return "identity";
    case DenoiserKind::GaussianSmooth: return "gaussian";
    case DenoiserKind::WienerMmse: return "wiener";
    case DenoiserKind::External: return "external";
    case DenoiserKind::Custom: return "custom";
  }
  return "unknown";
}

/// Exact posterior mean under a WienerPrior for x = x* + N(0, sigma^2 I):
///   xhat(f) = mean(f) + p(f) / (p(f) + sigma^2) (x(f) - mean(f)).
inline ImageTensor wiener_denoise(const WienerPrior& prior, const ImageTensor& x, double sigma) {
  const Shape& sh = x.shape();
  if (sh.height != prior.height || sh.width != prior.width) {
    throw DimensionError("wiener prior grid " + std::to_string(prior.height) + "x" +
                         std::to_string(prior.width) + " does not match image " + sh.to_string());
  }
  if (sigma == 0.0) return x;
  const double var = sigma * sigma;
  ImageTensor centered = x;
  if (!prior.mean.empty()) {
    for (std::size_t c = 0; c < sh.channels; ++c) {
      auto plane = centered.channel(c);
      for (std::size_t i = 0; i < plane.size(); ++i) plane[i] -= prior.mean[i];
    }
  }
  ImageTensor out = detail::filter_channels(centered, [&](std::size_t i, fft::Complex v) {
    const double p = prior.power[i];
    return p + var > 0.0 ? v * (p / (p + var)) : fft::Complex{};
  });
  if (!prior.mean.empty()) {
    for (std::size_t c = 0; c < sh.channels; ++c) {
      auto plane = out.channel(c);
      for (std::size_t i = 0; i < plane.size(); ++i) plane[i] += prior.mean[i];
    }
  }
  return out;
}

/// Circular Gaussian smoothing with bandwidth h = kappa * sigma (unit-sum kernel).
inline ImageTensor gaussian_smooth(const ImageTensor& x, double sigma, double kappa) {
  const double h = kappa * sigma;
  if (h <= 0.0) return x;
  const auto radius = static_cast<std::size_t>(std::ceil(3.0 * h));
  const Kernel k = gaussian_kernel(2 * radius + 1, h);
  const fft::Spectrum response = frequency_response(k, x.shape().height, x.shape().width);
  return detail::filter_channels(x, [&](std::size_t i, fft::Complex v) { return v * response[i]; });
}

namespace detail {

inline std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

/// mkdtemp-backed directory removed on scope exit.
class ScratchDir {
 public:
  ScratchDir() {
    std::string pattern = (std::filesystem::temp_directory_path() / "pgr-denoise-XXXXXX").string();
    if (::mkdtemp(pattern.data()) == nullptr) throw DenoiserError("cannot create scratch directory");
    path_ = pattern;
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp_tail(const std::filesystem::path& p, std::size_t max_bytes = 2000) {
  std::ifstream in(p);
  if (!in) return {};
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string s = ss.str();
  if (s.size() > max_bytes) s = "..." + s.substr(s.size() - max_bytes);
  return s;
}

}  // namespace detail

/// Runs `<command> <input.pgt> <output.pgt> <sigma>` in an isolated scratch
/// directory and reads the result back.
inline ImageTensor external_denoise(const std::string& command, const ImageTensor& x, double sigma) {
  if (command.empty()) throw DenoiserError("external denoiser command is empty");
  detail::ScratchDir dir;
  const auto in = dir.path() / "input.pgt";
  const auto out = dir.path() / "output.pgt";
  const auto err = dir.path() / "stderr.txt";
  io::write_tensor(in, x);

  char sigma_text[64];
  std::snprintf(sigma_text, sizeof sigma_text, "%.17g", sigma);
  const std::string cmdline = command + " " + detail::shell_quote(in.string()) + " " +
                              detail::shell_quote(out.string()) + " " + sigma_text + " >" +
                              detail::shell_quote(err.string()) + " 2>&1";
  const int status = std::system(cmdline.c_str());
  if (status == -1) throw DenoiserError("external denoiser: could not start shell");
  const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  if (code != 0) {
    throw DenoiserError("external denoiser `" + command + "` exited with status " +
                        std::to_string(code) + ": " + detail::slurp_tail(err));
  }
  ImageTensor result;
  try {
    result = io::read_tensor(out);
  } catch (const IoError& e) {
    throw DenoiserError("external denoiser `" + command + "` produced bad output: " + e.what() +
                        " " + detail::slurp_tail(err));
  }
  if (result.shape() != x.shape()) {
    throw DenoiserError("external denoiser `" + command + "` returned shape " +
                        result.shape().to_string() + ", expected " + x.shape().to_string());
  }
  return result;
}

/// Gaussian denoiser D(x; sigma).
class Denoiser {
 public:
  using Function = std::function<ImageTensor(const ImageTensor&, double)>;

  static Denoiser identity() {
    return Denoiser(DenoiserKind::Identity, [](const ImageTensor& x, double) { return x; });
  }

  static Denoiser gaussian(double kappa = 1.0) {
    if (!(kappa >= 0.0)) throw ValidationError("gaussian denoiser kappa must be >= 0");
    return Denoiser(DenoiserKind::GaussianSmooth,
                    [kappa](const ImageTensor& x, double s) { return gaussian_smooth(x, s, kappa); });
  }

  static Denoiser wiener(WienerPrior prior) {
    prior.validate();
    auto p = std::make_shared<const WienerPrior>(std::move(prior));
    return Denoiser(DenoiserKind::WienerMmse,
                    [p](const ImageTensor& x, double s) { return wiener_denoise(*p, x, s); });
  }

  static Denoiser external(std::string command) {
    return Denoiser(DenoiserKind::External, [cmd = std::move(command)](const ImageTensor& x, double s) {
      return external_denoise(cmd, x, s);
    });
  }

  static Denoiser custom(Function f) { return Denoiser(DenoiserKind::Custom, std::move(f)); }

  DenoiserKind kind() const { return kind_; }

  ImageTensor operator()(const ImageTensor& x, double sigma) const {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
      throw ValidationError("denoiser noise level must be finite and >= 0, got " + std::to_string(sigma));
    }
    ImageTensor out = fn_(x, sigma);
    if (out.shape() != x.shape()) {
      throw DenoiserError(std::string(to_string(kind_)) + " denoiser changed the shape");
    }
    if (!out.all_finite()) {
      throw DenoiserError(std::string(to_string(kind_)) + " denoiser produced non-finite values");
    }
    return out;
  }

 private:
  Denoiser(DenoiserKind kind, Function fn) : kind_(kind), fn_(std::move(fn)) {}

  DenoiserKind kind_;
  Function fn_;
};

inline ImageTensor denoise(const Denoiser& d, const ImageTensor& x, double sigma) { return d(x, sigma); }

}  // namespace pgr
