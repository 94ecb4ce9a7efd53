#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>

#include "weatherfit/image.hpp"
#include "weatherfit/io.hpp"

namespace weatherfit {

// Fixed refraction offsets (U, V) in pixels, indexed by drop-local
// coordinates normalized to [-1, 1] over the drop's bounding radius.
struct DisplacementField {
  Raster<double> u;
  Raster<double> v;

  int size() const noexcept { return u.width(); }

  // Nearest-neighbor lookup at normalized drop-local coordinates.
  std::pair<double, double> at(double nx, double ny) const noexcept {
    const int n = size();
    const int ix = std::clamp(static_cast<int>(std::lround((nx + 1.0) * 0.5 * (n - 1))), 0, n - 1);
    const int iy = std::clamp(static_cast<int>(std::lround((ny + 1.0) * 0.5 * (n - 1))), 0, n - 1);
    return {u(ix, iy), v(ix, iy)};
  }
};

// On-disk encoding: offset = (code - 32768) / 2048 pixels.
inline constexpr double kDisplacementScale = 2048.0;
inline constexpr int kDisplacementZero = 32768;

inline std::uint16_t encode_displacement(double offset) {
  const long c = std::lround(offset * kDisplacementScale) + kDisplacementZero;
  return static_cast<std::uint16_t>(std::clamp(c, 0L, 65535L));
}

inline double decode_displacement(std::uint16_t code) {
  return (static_cast<int>(code) - kDisplacementZero) / kDisplacementScale;
}

// Inverting-lens field: a point at local offset r samples the scene at
// -16 * r * (1 - 0.3 |r|^2) around the drop center. Radially symmetric,
// smooth, bounded by 16 px. Values are pre-quantized to the file encoding so
// the generated and the shipped fields are bit-identical.
inline DisplacementField default_displacement(int n = 64) {
  DisplacementField f{Raster<double>(n, n), Raster<double>(n, n)};
  for (int iy = 0; iy < n; ++iy) {
    for (int ix = 0; ix < n; ++ix) {
      const double nx = 2.0 * ix / (n - 1) - 1.0;
      const double ny = 2.0 * iy / (n - 1) - 1.0;
      const double falloff = 1.0 - 0.3 * (nx * nx + ny * ny);
      f.u(ix, iy) = decode_displacement(encode_displacement(-16.0 * nx * falloff));
      f.v(ix, iy) = decode_displacement(encode_displacement(-16.0 * ny * falloff));
    }
  }
  return f;
}

inline DisplacementField load_displacement(const std::filesystem::path& udisp,
                                           const std::filesystem::path& vdisp) {
  const auto cu = load_pgm16(udisp);
  const auto cv = load_pgm16(vdisp);
  if (cu.width() != cv.width() || cu.height() != cv.height() || cu.width() != cu.height() ||
      cu.width() < 2)
    throw IoError("displacement rasters must be equal-sized squares: " + udisp.string() +
                  ", " + vdisp.string());
  DisplacementField f{Raster<double>(cu.width(), cu.height()),
                      Raster<double>(cv.width(), cv.height())};
  for (std::size_t i = 0; i < cu.size(); ++i) {
    f.u.data()[i] = decode_displacement(cu.data()[i]);
    f.v.data()[i] = decode_displacement(cv.data()[i]);
  }
  return f;
}

inline void save_displacement(const DisplacementField& f, const std::filesystem::path& udisp,
                              const std::filesystem::path& vdisp) {
  Raster<std::uint16_t> cu(f.u.width(), f.u.height());
  Raster<std::uint16_t> cv(f.v.width(), f.v.height());
  for (std::size_t i = 0; i < cu.size(); ++i) {
    cu.data()[i] = encode_displacement(f.u.data()[i]);
    cv.data()[i] = encode_displacement(f.v.data()[i]);
  }
  save_pgm16(cu, udisp);
  save_pgm16(cv, vdisp);
}

}  // namespace weatherfit
