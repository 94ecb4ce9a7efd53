#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "weatherfit/error.hpp"
#include "weatherfit/image.hpp"
#include "weatherfit/rng.hpp"

namespace weatherfit {

// One drop or dirt blob. The outline is
//   r(phi) = size * (1 + shape * sin(2 phi) + 0.1 * n(phi))
// with n a three-harmonic periodic noise bounded by 1.
struct Blob {
  double cx = 0.0;
  double cy = 0.0;
  double size = 1.0;
  double shape = 0.0;
  std::array<double, 3> noise_amp{};
  std::array<double, 3> noise_phase{};
  double thickness = 1.0;

  static constexpr std::array<int, 3> kHarmonics{3, 4, 5};

  double noise(double phi) const noexcept {
    double n = 0.0;
    for (std::size_t k = 0; k < 3; ++k)
      n += noise_amp[k] * std::sin(kHarmonics[k] * phi + noise_phase[k]);
    return n;
  }

  double radius(double phi) const noexcept {
    return size * (1.0 + shape * std::sin(2.0 * phi) + 0.1 * noise(phi));
  }

  // Upper bound on radius(phi) over all phi.
  double bound() const noexcept { return size * (1.0 + std::abs(shape) + 0.1); }

  bool contains(double x, double y) const noexcept {
    const double dx = x - cx;
    const double dy = y - cy;
    const double r2 = dx * dx + dy * dy;
    if (r2 == 0.0) return true;
    const double r = radius(std::atan2(dy, dx));
    return r > 0.0 && r2 <= r * r;
  }
};

struct BlobKind {
  double shape = 0.0;
  double size = 1.0;
  double frequency = 0.0;  // expected blobs per megapixel
};

// Draws Poisson(frequency * megapixels) blobs per kind, centers uniform over
// the image. With a mask, centers falling on disallowed pixels are redrawn up
// to 100 times, after which the blob is dropped.
inline std::vector<Blob> place_blobs(int width, int height, std::span<const BlobKind> kinds,
                                     double thickness_lo, double thickness_hi, RngStream& rng,
                                     const BinaryMask* mask = nullptr) {
  if (mask && !mask->same_shape(width, height))
    throw InvalidArgument("injection mask dimensions differ from the scene");
  const double megapixels = static_cast<double>(width) * height / 1e6;
  std::vector<Blob> blobs;
  for (const BlobKind& kind : kinds) {
    const std::uint64_t count = rng.poisson(kind.frequency * megapixels);
    for (std::uint64_t i = 0; i < count; ++i) {
      Blob b;
      b.size = kind.size;
      b.shape = kind.shape;
      bool placed = false;
      for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
        b.cx = rng.uniform(0.0, width);
        b.cy = rng.uniform(0.0, height);
        placed = !mask || (*mask)(static_cast<int>(b.cx), static_cast<int>(b.cy));
      }
      for (auto& a : b.noise_amp) a = rng.uniform(-1.0, 1.0) / 3.0;
      for (auto& p : b.noise_phase) p = rng.uniform(0.0, 2.0 * std::numbers::pi);
      b.thickness = rng.uniform(thickness_lo, thickness_hi);
      if (placed) blobs.push_back(b);
    }
  }
  return blobs;
}

// Calls fn(x, y) for every pixel center covered by the blob.
template <typename Fn>
void for_each_covered(const Blob& b, int width, int height, Fn&& fn) {
  const double r = b.bound();
  const int x0 = std::max(0, static_cast<int>(std::floor(b.cx - r)));
  const int x1 = std::min(width - 1, static_cast<int>(std::ceil(b.cx + r)));
  const int y0 = std::max(0, static_cast<int>(std::floor(b.cy - r)));
  const int y1 = std::min(height - 1, static_cast<int>(std::ceil(b.cy + r)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      if (b.contains(x, y)) fn(x, y);
}

}  // namespace weatherfit
