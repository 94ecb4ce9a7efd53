#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "weatherfit/error.hpp"
#include "weatherfit/image.hpp"

namespace weatherfit {

// Normalized 1-D Gaussian taps for offsets -R..R with R = ceil(3 sigma).
inline std::vector<double> gaussian_kernel(double sigma) {
  if (!std::isfinite(sigma) || sigma < 0.0)
    throw InvalidArgument("blur sigma must be finite and non-negative");
  if (sigma == 0.0) return {1.0};
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * static_cast<std::size_t>(radius) + 1);
  double total = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    const double w = std::exp(-0.5 * (k * k) / (sigma * sigma));
    taps[static_cast<std::size_t>(k + radius)] = w;
    total += w;
  }
  for (double& w : taps) w /= total;
  return taps;
}

// Half-sample symmetric reflection (d c b a | a b c d | d c b a), applied
// periodically so any offset is valid. With a symmetric kernel this border
// policy conserves the signal sum exactly.
constexpr int reflect_index(int i, int n) noexcept {
  if (n == 1) return 0;
  const int period = 2 * n;
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - 1 - m;
}

// Separable blur of an interleaved buffer with `channels` samples per pixel.
inline void blur_interleaved(std::vector<double>& buf, int width, int height, int channels,
                             double sigma) {
  const std::vector<double> taps = gaussian_kernel(sigma);
  if (taps.size() == 1 || buf.empty()) return;
  const int radius = static_cast<int>(taps.size() / 2);
  const auto stride = static_cast<std::size_t>(width) * static_cast<std::size_t>(channels);
  std::vector<double> tmp(buf.size(), 0.0);

  // Horizontal pass: buf -> tmp.
  std::vector<int> xi(static_cast<std::size_t>(width + 2 * radius));
  for (int x = -radius; x < width + radius; ++x)
    xi[static_cast<std::size_t>(x + radius)] = reflect_index(x, width);
  for (int y = 0; y < height; ++y) {
    const double* src = buf.data() + static_cast<std::size_t>(y) * stride;
    double* dst = tmp.data() + static_cast<std::size_t>(y) * stride;
    for (int x = 0; x < width; ++x) {
      for (int k = -radius; k <= radius; ++k) {
        const double w = taps[static_cast<std::size_t>(k + radius)];
        const double* p = src + static_cast<std::size_t>(xi[static_cast<std::size_t>(x + k + radius)]) *
                                    static_cast<std::size_t>(channels);
        for (int c = 0; c < channels; ++c) dst[x * channels + c] += w * p[c];
      }
    }
  }

  // Vertical pass: tmp -> buf, accumulating whole rows.
  std::fill(buf.begin(), buf.end(), 0.0);
  for (int y = 0; y < height; ++y) {
    double* dst = buf.data() + static_cast<std::size_t>(y) * stride;
    for (int k = -radius; k <= radius; ++k) {
      const double w = taps[static_cast<std::size_t>(k + radius)];
      const double* src =
          tmp.data() + static_cast<std::size_t>(reflect_index(y + k, height)) * stride;
      for (std::size_t i = 0; i < stride; ++i) dst[i] += w * src[i];
    }
  }
}

// Gaussian point-spread blur; sigma = 0 returns the input unchanged.
inline Image gaussian_blur(const Image& img, double sigma) {
  if (!std::isfinite(sigma) || sigma < 0.0)
    throw InvalidArgument("blur sigma must be finite and non-negative");
  if (sigma == 0.0) return img;
  std::vector<double> buf(img.samples().begin(), img.samples().end());
  blur_interleaved(buf, img.width(), img.height(), Image::kChannels, sigma);
  return Image(img.width(), img.height(), std::move(buf));
}

inline Raster<double> gaussian_blur(const Raster<double>& r, double sigma) {
  if (!std::isfinite(sigma) || sigma < 0.0)
    throw InvalidArgument("blur sigma must be finite and non-negative");
  if (sigma == 0.0) return r;
  std::vector<double> buf(r.data().begin(), r.data().end());
  blur_interleaved(buf, r.width(), r.height(), 1, sigma);
  return Raster<double>(r.width(), r.height(), std::move(buf));
}

}  // namespace weatherfit
