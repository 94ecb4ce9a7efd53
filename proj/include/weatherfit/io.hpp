#pragma once

#include <png.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "weatherfit/error.hpp"
#include "weatherfit/image.hpp"

namespace weatherfit {

namespace detail {

inline std::string describe(const std::filesystem::path& path, const std::string& cause) {
  return path.string() + ": " + cause;
}

// Reads one whitespace/comment-delimited token of a netpbm header.
inline std::string pnm_token(std::istream& in) {
  std::string tok;
  char ch = 0;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

struct PnmHeader {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 1;
};

inline PnmHeader read_pnm_header(std::istream& in, const std::filesystem::path& path,
                                 bool has_maxval) {
  PnmHeader h;
  h.magic = pnm_token(in);
  try {
    h.width = std::stoi(pnm_token(in));
    h.height = std::stoi(pnm_token(in));
    if (has_maxval) h.maxval = std::stoi(pnm_token(in));
  } catch (const std::exception&) {
    throw IoError(describe(path, "malformed netpbm header"));
  }
  if (h.width <= 0 || h.height <= 0) throw IoError(describe(path, "invalid dimensions"));
  return h;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(describe(path, "cannot open for writing"));
  return out;
}

}  // namespace detail

// Loads an 8-bit RGB PNG; samples map to [0,1] by v/255.
inline Image load_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError(detail::describe(path, "file not found"));
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str()))
    throw IoError(detail::describe(path, std::string("cannot decode PNG: ") + png.message));
  const auto fmt = png.format;
  if (fmt & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&png);
    throw IoError(detail::describe(path, "unsupported bit depth (expected 8-bit)"));
  }
  if (!(fmt & PNG_FORMAT_FLAG_COLOR) || (fmt & PNG_FORMAT_FLAG_ALPHA) ||
      (fmt & PNG_FORMAT_FLAG_COLORMAP)) {
    png_image_free(&png);
    throw IoError(detail::describe(path, "unsupported color type (expected RGB)"));
  }
  png.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, bytes.data(), 0, nullptr))
    throw IoError(detail::describe(path, std::string("cannot decode PNG: ") + png.message));
  std::vector<double> samples(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) samples[i] = bytes[i] / 255.0;
  return Image(static_cast<int>(png.width), static_cast<int>(png.height), std::move(samples));
}

inline std::uint8_t quantize8(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

inline void save_image(const Image& img, const std::filesystem::path& path) {
  if (img.empty()) throw InvalidArgument("cannot save an empty image");
  std::vector<std::uint8_t> bytes(img.samples().size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = quantize8(img.samples()[i]);
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width());
  png.height = static_cast<png_uint_32>(img.height());
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    std::string cause = png.message;
    png_image_free(&png);
    throw IoError(detail::describe(path, "cannot write PNG: " + cause));
  }
}

// Binary 16-bit PGM (P5, maxval 65535, big-endian samples).
inline Raster<std::uint16_t> load_pgm16(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(detail::describe(path, "file not found"));
  const auto h = detail::read_pnm_header(in, path, true);
  if (h.magic != "P5") throw IoError(detail::describe(path, "not a binary PGM (P5)"));
  if (h.maxval < 256 || h.maxval > 65535)
    throw IoError(detail::describe(path, "unsupported bit depth (expected 16-bit PGM)"));
  Raster<std::uint16_t> r(h.width, h.height);
  std::vector<unsigned char> bytes(r.size() * 2);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
    throw IoError(detail::describe(path, "truncated PGM data"));
  auto d = r.data();
  for (std::size_t i = 0; i < d.size(); ++i)
    d[i] = static_cast<std::uint16_t>((bytes[2 * i] << 8) | bytes[2 * i + 1]);
  return r;
}

inline void save_pgm16(const Raster<std::uint16_t>& r, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << "P5\n" << r.width() << ' ' << r.height() << "\n65535\n";
  std::vector<unsigned char> bytes(r.size() * 2);
  auto d = r.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    bytes[2 * i] = static_cast<unsigned char>(d[i] >> 8);
    bytes[2 * i + 1] = static_cast<unsigned char>(d[i] & 0xff);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(detail::describe(path, "write failed"));
}

// Stores a [0,1] raster as round(v * 65535).
inline void save_unit_pgm16(const Raster<double>& r, const std::filesystem::path& path) {
  Raster<std::uint16_t> q(r.width(), r.height());
  for (std::size_t i = 0; i < q.size(); ++i)
    q.data()[i] = static_cast<std::uint16_t>(std::lround(std::clamp(r.data()[i], 0.0, 1.0) * 65535.0));
  save_pgm16(q, path);
}

inline constexpr std::uint16_t kDepthSkyCode = 65535;

// Depth from a 16-bit PGM: code * meters_per_unit, with 65535 meaning sky.
inline DepthMap load_depth(const std::filesystem::path& path, double meters_per_unit) {
  if (!(meters_per_unit > 0.0) || !std::isfinite(meters_per_unit))
    throw InvalidArgument("depth.meters_per_unit must be positive and finite");
  const auto codes = load_pgm16(path);
  Raster<double> depth(codes.width(), codes.height());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const std::uint16_t c = codes.data()[i];
    if (c == 0) throw IoError(detail::describe(path, "non-positive depth"));
    depth.data()[i] = c == kDepthSkyCode ? DepthMap::kSky : c * meters_per_unit;
  }
  return DepthMap(std::move(depth));
}

inline void save_depth(const DepthMap& depth, const std::filesystem::path& path,
                       double meters_per_unit) {
  Raster<std::uint16_t> codes(depth.width(), depth.height());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const double d = depth.raster().data()[i];
    if (std::isinf(d)) {
      codes.data()[i] = kDepthSkyCode;
    } else {
      const long c = std::lround(d / meters_per_unit);
      codes.data()[i] = static_cast<std::uint16_t>(std::clamp(c, 1L, 65534L));
    }
  }
  save_pgm16(codes, path);
}

// Binary PBM (P4). A set bit marks an allowed (true) mask pixel.
inline void save_pbm(const BinaryMask& mask, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << "P4\n" << mask.width() << ' ' << mask.height() << '\n';
  const int row_bytes = (mask.width() + 7) / 8;
  std::vector<unsigned char> row(static_cast<std::size_t>(row_bytes));
  for (int y = 0; y < mask.height(); ++y) {
    std::fill(row.begin(), row.end(), 0);
    for (int x = 0; x < mask.width(); ++x)
      if (mask(x, y)) row[static_cast<std::size_t>(x / 8)] |= static_cast<unsigned char>(0x80 >> (x % 8));
    out.write(reinterpret_cast<const char*>(row.data()), row_bytes);
  }
  if (!out) throw IoError(detail::describe(path, "write failed"));
}

inline BinaryMask load_pbm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(detail::describe(path, "file not found"));
  const auto h = detail::read_pnm_header(in, path, false);
  if (h.magic != "P4") throw IoError(detail::describe(path, "not a binary PBM (P4)"));
  BinaryMask mask(h.width, h.height);
  const int row_bytes = (h.width + 7) / 8;
  std::vector<unsigned char> row(static_cast<std::size_t>(row_bytes));
  for (int y = 0; y < h.height; ++y) {
    in.read(reinterpret_cast<char*>(row.data()), row_bytes);
    if (in.gcount() != row_bytes) throw IoError(detail::describe(path, "truncated PBM data"));
    for (int x = 0; x < h.width; ++x)
      mask(x, y) = (row[static_cast<std::size_t>(x / 8)] >> (7 - x % 8)) & 1;
  }
  return mask;
}

}  // namespace weatherfit
