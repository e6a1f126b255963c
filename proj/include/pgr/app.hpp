#pragma once

// Command implementations behind the `pgr` executable. Argument parsing lives
// in tools/pgr.cpp; everything here works on flat key=value maps so the same
// code serves flags, config files, and sidecars.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "pgr/denoisers.hpp"
#include "pgr/error.hpp"
#include "pgr/guidance.hpp"
#include "pgr/io.hpp"
#include "pgr/kernel.hpp"
#include "pgr/linops.hpp"
#include "pgr/metrics.hpp"
#include "pgr/schemes.hpp"
#include "pgr/tensor.hpp"
#include "pgr/verify.hpp"

namespace pgr::app {

namespace fs = std::filesystem;

using ConfigMap = std::map<std::string, std::string>;

enum ExitCode : int { kSuccess = 0, kRuntimeFailure = 1, kValidationFailure = 2 };

// ---------------------------------------------------------------------------
// Config text

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Flat "key = value" lines; '#' starts a comment; blank lines ignored.
inline ConfigMap parse_config_text(const std::string& text, const std::string& origin = "config") {
  ConfigMap out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(origin + ":" + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ValidationError(origin + ":" + std::to_string(lineno) + ": empty key");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

inline ConfigMap read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

inline std::string format_config(const ConfigMap& cfg) {
  std::string out;
  for (const auto& [k, v] : cfg) out += k + "=" + v + "\n";
  return out;
}

inline void write_config_file(const fs::path& path, const ConfigMap& cfg, const std::string& header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# " << header << "\n" << format_config(cfg);
}

/// Later layers override earlier ones.
inline ConfigMap merge(std::initializer_list<const ConfigMap*> layers) {
  ConfigMap out;
  for (const ConfigMap* layer : layers)
    for (const auto& [k, v] : *layer) out[k] = v;
  return out;
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// Typed access

class RunConfig {
 public:
  explicit RunConfig(ConfigMap values) : values_(std::move(values)) {}

  const ConfigMap& values() const { return values_; }
  bool has(const std::string& key) const { return values_.count(key) && !values_.at(key).empty(); }

  std::string str(const std::string& key) const {
    if (!has(key)) throw ValidationError("missing required setting --" + key);
    return values_.at(key);
  }

  std::string str_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? values_.at(key) : fallback;
  }

  double real(const std::string& key) const {
    const std::string s = str(key);
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) {
      throw ValidationError("--" + key + ": expected a finite number, got '" + s + "'");
    }
    return v;
  }

  double nonneg(const std::string& key) const {
    const double v = real(key);
    if (v < 0.0) throw ValidationError("--" + key + " must be >= 0, got " + str(key));
    return v;
  }

  std::int64_t integer(const std::string& key) const {
    const std::string s = str(key);
    std::int64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
      throw ValidationError("--" + key + ": expected an integer, got '" + s + "'");
    }
    return v;
  }

  std::uint64_t seed(const std::string& key) const {
    const std::string s = str(key);
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
      throw ValidationError("--" + key + ": expected a non-negative integer, got '" + s + "'");
    }
    return v;
  }

  std::string choice(const std::string& key, std::initializer_list<const char*> allowed) const {
    const std::string s = str(key);
    std::string list;
    for (const char* a : allowed) {
      if (s == a) return s;
      list += std::string(list.empty() ? "" : ", ") + a;
    }
    throw ValidationError("--" + key + ": '" + s + "' is not one of {" + list + "}");
  }

 private:
  ConfigMap values_;
};

// ---------------------------------------------------------------------------
// Shared pieces

inline fs::path sidecar_path(const fs::path& measurement) { return fs::path(measurement.string() + ".meta"); }
inline fs::path echo_path(const fs::path& output) { return fs::path(output.string() + ".config"); }

inline Shape shape_from(const RunConfig& cfg) {
  const auto c = cfg.integer("channels");
  const auto h = cfg.integer("height");
  const auto w = cfg.integer("width");
  if (c <= 0 || h <= 0 || w <= 0) throw ValidationError("image shape must be positive");
  return Shape{static_cast<std::size_t>(c), static_cast<std::size_t>(h), static_cast<std::size_t>(w)};
}

/// Observation operator for `task` acting on images of the given shape.
inline LinearOperator build_operator(const RunConfig& cfg, const Shape& image) {
  const std::string task = cfg.choice("task", {"deblur", "sr", "inpaint"});
  if (task == "deblur") return CircularConvolution(io::read_kernel(cfg.str("kernel")), image);
  if (task == "sr") {
    const auto s = cfg.integer("scale");
    if (s < 1) throw ValidationError("--scale must be a positive integer");
    return DownsampleConvolution(io::read_kernel(cfg.str("kernel")), static_cast<std::size_t>(s), image);
  }
  const io::MaskGrid m = io::read_mask(cfg.str("mask"));
  if (m.height != image.height || m.width != image.width) {
    throw DimensionError("mask " + cfg.str("mask") + " is " + std::to_string(m.height) + "x" +
                         std::to_string(m.width) + ", image is " + image.to_string());
  }
  return MaskOperator(m.keep, image);
}

inline WienerPrior prior_from(const RunConfig& cfg, const Shape& image) {
  WienerPrior p = WienerPrior::power_law(image.height, image.width, cfg.real("prior-amplitude"));
  const double mean = cfg.real("prior-mean");
  return mean == 0.0 ? p : p.with_constant_mean(mean);
}

inline Denoiser build_denoiser(const RunConfig& cfg, const Shape& image) {
  const std::string kind = cfg.choice("denoiser", {"identity", "gaussian", "wiener", "external"});
  if (kind == "identity") return Denoiser::identity();
  if (kind == "gaussian") return Denoiser::gaussian(cfg.nonneg("kappa"));
  if (kind == "wiener") return Denoiser::wiener(prior_from(cfg, image));
  return Denoiser::external(cfg.str("denoiser-cmd"));
}

inline ConfigMap restore_defaults() {
  return {
      {"method", "idpg"},        {"denoiser", "wiener"},    {"kappa", "1"},
      {"prior-amplitude", "1"},  {"prior-mean", "0"},       {"gamma", "8"},
      {"zeta", "0.5"},           {"eta-tilde", "0.7"},      {"c", "auto"},
      {"T", "100"},              {"train-steps", "0"},      {"beta-start", "0.0001"},
      {"beta-end", "0.02"},      {"seed", "0"},             {"step-size", "unit"},
  };
}

// ---------------------------------------------------------------------------
// degrade

/// Reads --input, writes y = A x* + e to --output plus the sidecar and config echo.
inline int cmd_degrade(const ConfigMap& flags, std::ostream& out) {
  ConfigMap file;
  if (flags.count("config")) file = read_config_file(flags.at("config"));
  const ConfigMap defaults{{"sigma-e", "0"}, {"seed", "0"}};
  RunConfig cfg(merge({&defaults, &file, &flags}));
  cfg.choice("task", {"deblur", "sr", "inpaint"});
  const double sigma_e = cfg.nonneg("sigma-e");
  const std::uint64_t seed = cfg.seed("seed");
  const fs::path input = cfg.str("input");
  const fs::path output = cfg.str("output");

  const ImageTensor x = io::read_image(input);
  const LinearOperator op = build_operator(cfg, x.shape());
  const ImageTensor y = degrade(op, x, NoiseSpec{sigma_e, seed});
  io::write_tensor(output, y);

  ConfigMap meta;
  for (const char* k : {"task", "kernel", "scale", "mask"})
    if (cfg.has(k)) meta[k] = cfg.str(k);
  meta["sigma-e"] = format_double(sigma_e);
  meta["noise-seed"] = std::to_string(seed);
  meta["channels"] = std::to_string(x.shape().channels);
  meta["height"] = std::to_string(x.shape().height);
  meta["width"] = std::to_string(x.shape().width);
  meta["source"] = input.string();
  write_config_file(sidecar_path(output), meta, "measurement sidecar");

  ConfigMap echo = cfg.values();
  echo.erase("config");
  echo["sigma-e"] = format_double(sigma_e);
  write_config_file(echo_path(output), echo, "pgr degrade");
  out << "wrote " << output.string() << " shape=" << y.shape().to_string() << "\n";
  return kSuccess;
}

// ---------------------------------------------------------------------------
// restore

inline Method parse_method(const RunConfig& cfg) {
  const std::string m = cfg.choice("method", {"idpg", "idbp", "pgm_ls", "ddpg"});
  if (m == "idbp") return Method::Idbp;
  if (m == "pgm_ls") return Method::PgmLs;
  if (m == "ddpg") return Method::Ddpg;
  return Method::Idpg;
}

inline int cmd_restore(const ConfigMap& flags, std::ostream& out) {
  ConfigMap file;
  if (flags.count("config")) file = read_config_file(flags.at("config"));
  const ConfigMap defaults = restore_defaults();
  const ConfigMap pre = merge({&defaults, &file, &flags});
  const std::string measurement = RunConfig(pre).str("measurement");
  const fs::path meta_path = sidecar_path(measurement);
  if (!fs::exists(meta_path)) throw IoError("missing sidecar " + meta_path.string());
  const ConfigMap sidecar = read_config_file(meta_path);
  ConfigMap merged = merge({&defaults, &sidecar, &file, &flags});
  merged.erase("config");
  merged.erase("source");
  RunConfig cfg(merged);

  const Shape image = shape_from(cfg);
  const fs::path output = cfg.str("output");
  const LinearOperator op = build_operator(cfg, image);
  const ImageTensor y = io::read_tensor(measurement);
  if (y.shape() != op.output_shape()) {
    throw DimensionError("measurement " + measurement + " has shape " + y.shape().to_string() +
                         ", operator expects " + op.output_shape().to_string());
  }
  const Denoiser denoiser = build_denoiser(cfg, image);

  SchemeConfig sc;
  sc.method = parse_method(cfg);
  sc.sigma_e = cfg.nonneg("sigma-e");
  sc.gamma = cfg.nonneg("gamma");
  sc.zeta = cfg.real("zeta");
  sc.seed = cfg.seed("seed");
  const auto T = cfg.integer("T");
  const auto train = cfg.integer("train-steps");
  if (T < 1 || T > 100000) throw ValidationError("--T must lie in [1, 100000]");
  if (train < 0 || train > 1000000) throw ValidationError("--train-steps must lie in [0, 1000000]");
  sc.T = static_cast<int>(T);
  sc.train_steps = static_cast<int>(train);
  sc.beta_start = cfg.real("beta-start");
  sc.beta_end = cfg.real("beta-end");
  sc.step_size =
      cfg.choice("step-size", {"unit", "ddim-ratio"}) == "unit" ? StepSizePolicy::Unit : StepSizePolicy::DdimRatio;
  sc.guidance.eta = cfg.has("eta") ? cfg.nonneg("eta") : eta_from_noise(sc.sigma_e, cfg.nonneg("eta-tilde"));
  sc.guidance.c = cfg.str("c") == "auto" ? default_ls_scale(op) : cfg.real("c");
  sc.validate();

  const RunTrace trace = run_scheme(denoiser, op, y, sc);
  io::write_tensor(output, trace.estimate);
  if (cfg.has("image-out")) io::write_pnm(cfg.str("image-out"), clamped(trace.estimate));
  if (cfg.has("trace")) {
    std::ofstream t(cfg.str("trace"));
    if (!t) throw IoError("cannot write trace " + cfg.str("trace"));
    trace.write(t);
  }

  ConfigMap echo = cfg.values();
  echo["c"] = format_double(sc.guidance.c);
  write_config_file(echo_path(output), echo, "pgr restore (resolved)");
  out << "wrote " << output.string() << " method=" << to_string(sc.method) << " T=" << sc.T
      << " eta=" << format_double(sc.guidance.eta) << "\n";
  return kSuccess;
}

// ---------------------------------------------------------------------------
// eval

struct EvalRow {
  std::string name;
  double psnr = 0.0;
  double mse = 0.0;
};

inline std::string format_psnr(double v) {
  if (std::isinf(v)) return "inf";
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v;
  return os.str();
}

/// PSNR/MSE per (restored, reference) pair after clamping the restored image
/// to [0, 1]; the mean line averages per-image values.
inline int cmd_eval(const std::vector<std::string>& restored, const std::vector<std::string>& reference,
                    std::ostream& out) {
  if (restored.empty()) throw ValidationError("eval needs at least one --restored file");
  if (restored.size() != reference.size()) {
    throw ValidationError("eval needs as many --reference files as --restored files");
  }
  std::vector<EvalRow> rows;
  for (std::size_t i = 0; i < restored.size(); ++i) {
    const ImageTensor x = clamped(io::read_image(restored[i]));
    const ImageTensor ref = io::read_image(reference[i]);
    if (x.shape() != ref.shape()) {
      throw DimensionError("shape mismatch: " + restored[i] + " is " + x.shape().to_string() + ", " +
                           reference[i] + " is " + ref.shape().to_string());
    }
    rows.push_back({fs::path(restored[i]).filename().string(), psnr(x, ref), mse(x, ref)});
  }
  double psnr_sum = 0.0;
  double mse_sum = 0.0;
  for (const auto& r : rows) {
    out << r.name << ' ' << format_psnr(r.psnr) << ' ' << std::setprecision(10) << r.mse << '\n';
    psnr_sum += r.psnr;
    mse_sum += r.mse;
  }
  const double n = static_cast<double>(rows.size());
  out << "mean " << format_psnr(psnr_sum / n) << ' ' << std::setprecision(10) << mse_sum / n << '\n';
  return kSuccess;
}

// ---------------------------------------------------------------------------
// verify

inline int cmd_verify(const theory::VerifyOptions& opts, std::ostream& out) {
  bool all = true;
  for (const auto& r : theory::run_verification(opts)) {
    out << r.line() << '\n';
    all = all && r.passed;
  }
  return all ? kSuccess : kRuntimeFailure;
}

// ---------------------------------------------------------------------------
// denoise (external-denoiser protocol: <cmd> <input.pgt> <output.pgt> <sigma>)

inline int cmd_denoise(const ConfigMap& flags, const std::string& input, const std::string& output,
                       double sigma, std::ostream&) {
  const ConfigMap defaults{{"denoiser", "wiener"}, {"kappa", "1"}, {"prior-amplitude", "1"}, {"prior-mean", "0"}};
  RunConfig cfg(merge({&defaults, &flags}));
  if (cfg.str("denoiser") == "external") throw ValidationError("denoise cannot wrap an external denoiser");
  const ImageTensor x = io::read_tensor(input);
  const Denoiser d = build_denoiser(cfg, x.shape());
  io::write_tensor(output, d(x, sigma));
  return kSuccess;
}

// ---------------------------------------------------------------------------
// make-kernel

inline int cmd_make_kernel(const ConfigMap& flags, std::ostream& out) {
  const ConfigMap defaults{{"type", "gaussian"}, {"size", "5"}, {"std", "10"}, {"scale", "2"}};
  RunConfig cfg(merge({&defaults, &flags}));
  const std::string type = cfg.choice("type", {"gaussian", "bicubic", "delta"});
  Kernel k;
  if (type == "gaussian") {
    const auto size = cfg.integer("size");
    if (size < 1) throw ValidationError("--size must be positive");
    k = gaussian_kernel(static_cast<std::size_t>(size), cfg.real("std"));
  } else if (type == "bicubic") {
    const auto s = cfg.integer("scale");
    if (s < 1) throw ValidationError("--scale must be positive");
    k = bicubic_kernel(static_cast<std::size_t>(s));
  } else {
    k = delta_kernel();
  }
  io::write_kernel(cfg.str("output"), k);
  out << "wrote " << cfg.str("output") << " " << k.height << "x" << k.width << "\n";
  return kSuccess;
}

}  // namespace pgr::app
