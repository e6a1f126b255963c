#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pgr/error.hpp"
#include "pgr/kernel.hpp"
#include "pgr/tensor.hpp"

namespace pgr::io {

namespace fs = std::filesystem;

// PGT1 tensor file: "PGT1", then channels, height, width as uint32 LE, then
// float32 LE values (channel-major, row-major).

namespace detail {

inline void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::string read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_all(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace detail

inline std::string encode_tensor(const ImageTensor& t) {
  std::string buf = "PGT1";
  detail::put_u32(buf, static_cast<std::uint32_t>(t.shape().channels));
  detail::put_u32(buf, static_cast<std::uint32_t>(t.shape().height));
  detail::put_u32(buf, static_cast<std::uint32_t>(t.shape().width));
  buf.reserve(buf.size() + 4 * t.size());
  for (double v : t.values()) {
    detail::put_u32(buf, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return buf;
}

inline ImageTensor decode_tensor(const std::string& bytes, const std::string& name = "tensor") {
  if (bytes.size() < 16 || bytes.compare(0, 4, "PGT1") != 0) {
    throw IoError(name + ": not a PGT1 tensor file");
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const Shape shape{detail::get_u32(p + 4), detail::get_u32(p + 8), detail::get_u32(p + 12)};
  if (!shape.valid()) throw IoError(name + ": invalid shape " + shape.to_string());
  if (bytes.size() != 16 + 4 * shape.size()) {
    throw IoError(name + ": expected " + std::to_string(16 + 4 * shape.size()) + " bytes, got " +
                  std::to_string(bytes.size()));
  }
  std::vector<double> data(shape.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = static_cast<double>(std::bit_cast<float>(detail::get_u32(p + 16 + 4 * i)));
  }
  ImageTensor t(shape, std::move(data));
  if (!t.all_finite()) throw IoError(name + ": contains non-finite values");
  return t;
}

inline void write_tensor(const fs::path& path, const ImageTensor& t) {
  detail::write_all(path, encode_tensor(t));
}

inline ImageTensor read_tensor(const fs::path& path) {
  return decode_tensor(detail::read_all(path), path.string());
}

// 8-bit binary PGM (P5, one channel) / PPM (P6, three channels), values
// mapped to [0, 1].

namespace detail {

inline void skip_space_and_comments(const std::string& s, std::size_t& pos) {
  while (pos < s.size()) {
    if (std::isspace(static_cast<unsigned char>(s[pos]))) {
      ++pos;
    } else if (s[pos] == '#') {
      while (pos < s.size() && s[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
}

inline std::size_t read_header_int(const std::string& s, std::size_t& pos, const std::string& name) {
  skip_space_and_comments(s, pos);
  std::size_t start = pos;
  while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
  if (start == pos) throw IoError(name + ": malformed PNM header");
  return std::stoul(s.substr(start, pos - start));
}

}  // namespace detail

inline ImageTensor read_pnm(const fs::path& path) {
  const std::string s = detail::read_all(path);
  const std::string name = path.string();
  if (s.size() < 2 || s[0] != 'P' || (s[1] != '5' && s[1] != '6')) {
    throw IoError(name + ": only binary PGM (P5) and PPM (P6) are supported");
  }
  const std::size_t channels = s[1] == '5' ? 1 : 3;
  std::size_t pos = 2;
  const std::size_t width = detail::read_header_int(s, pos, name);
  const std::size_t height = detail::read_header_int(s, pos, name);
  const std::size_t maxval = detail::read_header_int(s, pos, name);
  if (maxval == 0 || maxval > 255) throw IoError(name + ": only 8-bit images are supported");
  ++pos;  // single whitespace after maxval
  const Shape shape{channels, height, width};
  if (!shape.valid()) throw IoError(name + ": empty image");
  if (s.size() < pos + shape.size()) throw IoError(name + ": truncated pixel data");
  ImageTensor t(shape);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x)
      for (std::size_t c = 0; c < channels; ++c) {
        const auto byte = static_cast<unsigned char>(s[pos + (y * width + x) * channels + c]);
        t.at(c, y, x) = static_cast<double>(byte) / static_cast<double>(maxval);
      }
  return t;
}

/// Values are clamped to [0, 1] and rounded to 8 bits.
inline void write_pnm(const fs::path& path, const ImageTensor& t) {
  const Shape& sh = t.shape();
  if (sh.channels != 1 && sh.channels != 3) {
    throw ValidationError("PNM export needs 1 or 3 channels, got " + std::to_string(sh.channels));
  }
  std::string buf = (sh.channels == 1 ? "P5\n" : "P6\n") + std::to_string(sh.width) + " " +
                    std::to_string(sh.height) + "\n255\n";
  for (std::size_t y = 0; y < sh.height; ++y)
    for (std::size_t x = 0; x < sh.width; ++x)
      for (std::size_t c = 0; c < sh.channels; ++c) {
        const double v = std::clamp(t.at(c, y, x), 0.0, 1.0);
        buf.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
      }
  detail::write_all(path, buf);
}

/// Reads .pgm/.ppm as 8-bit images; anything else as a PGT1 tensor.
inline ImageTensor read_image(const fs::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return read_pnm(path);
  return read_tensor(path);
}

// Kernel / mask text files: first line "H W", then H*W whitespace-separated
// values, row-major.

namespace detail {

inline std::vector<double> read_grid(const fs::path& path, std::size_t& h, std::size_t& w) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  if (!(in >> h >> w) || h == 0 || w == 0) {
    throw IoError(path.string() + ": expected header \"H W\" with positive sizes");
  }
  std::vector<double> values(h * w);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(in >> values[i])) {
      throw IoError(path.string() + ": expected " + std::to_string(h * w) + " values, read " +
                    std::to_string(i));
    }
  }
  std::string extra;
  if (in >> extra) throw IoError(path.string() + ": trailing data after " + std::to_string(h * w) + " values");
  return values;
}

inline std::string format_grid(std::size_t h, std::size_t w, const std::vector<double>& v) {
  std::ostringstream out;
  out.precision(17);
  out << h << " " << w << "\n";
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) out << (x ? " " : "") << v[y * w + x];
    out << "\n";
  }
  return out.str();
}

}  // namespace detail

inline Kernel read_kernel(const fs::path& path) {
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<double> v = detail::read_grid(path, h, w);
  for (double x : v)
    if (!std::isfinite(x)) throw IoError(path.string() + ": non-finite kernel tap");
  return Kernel(h, w, std::move(v));
}

inline void write_kernel(const fs::path& path, const Kernel& k) {
  detail::write_all(path, detail::format_grid(k.height, k.width, k.taps));
}

struct MaskGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> keep;
};

inline MaskGrid read_mask(const fs::path& path) {
  MaskGrid m;
  const std::vector<double> v = detail::read_grid(path, m.height, m.width);
  m.keep.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] != 0.0 && v[i] != 1.0) throw IoError(path.string() + ": mask entries must be 0 or 1");
    m.keep[i] = v[i] == 1.0 ? 1 : 0;
  }
  return m;
}

inline void write_mask(const fs::path& path, const MaskGrid& m) {
  std::vector<double> v(m.keep.begin(), m.keep.end());
  detail::write_all(path, detail::format_grid(m.height, m.width, v));
}

}  // namespace pgr::io
