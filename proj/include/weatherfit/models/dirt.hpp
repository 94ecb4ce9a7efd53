#pragma once

#include <array>
#include <cmath>

#include "weatherfit/models/blobs.hpp"
#include "weatherfit/models/overlay.hpp"
#include "weatherfit/models/raindrop.hpp"

namespace weatherfit {

struct DirtParams {
  double sigma = 0.0;            // defocus blur, pixels
  double alpha = 0.5;            // maximum opacity
  double blob_frequency = 300.0; // blobs per megapixel
  double blob_size = 12.0;       // mean radius, pixels
  std::uint64_t seed = 0;

  void validate() const {
    if (!std::isfinite(sigma) || sigma < 0.0) throw InvalidArgument("dirt sigma must be >= 0");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("dirt alpha must lie in [0,1]");
    if (!(blob_frequency >= 0.0)) throw InvalidArgument("dirt blob frequency must be >= 0");
    if (!(blob_size > 0.0)) throw InvalidArgument("dirt blob size must be > 0");
  }
};

inline constexpr std::array<double, 3> kSoilTone{0.42, 0.33, 0.22};
inline constexpr double kDirtShape = 0.25;
inline constexpr double kDirtCenterBrightness = 0.3;

// Soil color at (x, y): brightness rises linearly from 0.3 at the image
// center to 1.0 at the corners.
inline std::array<double, 3> dirt_tone(int x, int y, int width, int height) {
  const double cx = 0.5 * (width - 1);
  const double cy = 0.5 * (height - 1);
  const double rmax = std::hypot(cx, cy);
  const double rn = rmax > 0.0 ? std::hypot(x - cx, y - cy) / rmax : 0.0;
  const double f = kDirtCenterBrightness + (1.0 - kDirtCenterBrightness) * rn;
  return {kSoilTone[0] * f, kSoilTone[1] * f, kSoilTone[2] * f};
}

inline LayerBuffer rasterize_dirt(int width, int height, std::span<const Blob> blobs) {
  LayerBuffer layer(width, height);
  for (const Blob& b : blobs) {
    for_each_covered(b, width, height, [&](int x, int y) {
      const auto t = dirt_tone(x, y, width, height);
      layer.put(x, y, t[0], t[1], t[2]);
    });
  }
  return layer;
}

inline Overlay render_dirt(const Image& scene, const DirtParams& params, RngStream& rng,
                           const BinaryMask* mask = nullptr) {
  params.validate();
  if (scene.empty()) throw InvalidArgument("render_dirt: empty scene");
  const BlobKind kind{kDirtShape, params.blob_size, params.blob_frequency};
  const auto blobs =
      place_blobs(scene.width(), scene.height(), std::span(&kind, 1), 1.0, 1.0, rng, mask);
  return rasterize_dirt(scene.width(), scene.height(), blobs).resolve(params.sigma, params.alpha);
}

}  // namespace weatherfit
