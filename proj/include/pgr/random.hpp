#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string_view>

#include "pgr/tensor.hpp"

namespace pgr {

/// Seedable, splittable pseudorandom stream.
///
/// std::mt19937_64 with a local Box-Muller transform; draws for a given seed
/// are identical across standard libraries.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  /// Independent child stream derived from this stream's seed state and a tag.
  /// Does not advance the parent.
  RandomStream split(std::string_view tag) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char ch : tag) {
      h ^= static_cast<unsigned char>(ch);
      h *= 0x100000001b3ULL;
    }
    std::mt19937_64 probe = engine_;
    return RandomStream(splitmix64(probe() ^ h));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (spare_) {
      double v = *spare_;
      spare_.reset();
      return v;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    return r * std::cos(theta);
  }

  void fill_normal(ImageTensor& t) {
    for (double& v : t.values()) v = normal();
  }

  ImageTensor normal(Shape shape) {
    ImageTensor t(shape);
    fill_normal(t);
    return t;
  }

 private:
  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

}  // namespace pgr
