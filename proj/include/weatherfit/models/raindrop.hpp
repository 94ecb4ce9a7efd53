#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "weatherfit/blur.hpp"
#include "weatherfit/models/blobs.hpp"
#include "weatherfit/models/displacement.hpp"
#include "weatherfit/models/overlay.hpp"

namespace weatherfit {

struct DropType {
  double shape = 0.0;      // t
  double size = 5.0;       // s, mean radius in pixels
  double frequency = 0.0;  // p, expected drops per megapixel
};

struct RaindropParams {
  double sigma = 0.0;  // defocus blur, pixels
  std::array<DropType, 4> drop_types{};
  double thickness_min = 0.6;
  double thickness_max = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!std::isfinite(sigma) || sigma < 0.0) throw InvalidArgument("raindrop sigma must be >= 0");
    if (!(thickness_min <= thickness_max)) throw InvalidArgument("raindrop thickness range inverted");
    for (const auto& d : drop_types) {
      if (!(d.size > 0.0)) throw InvalidArgument("raindrop size must be > 0");
      if (!(d.frequency >= 0.0)) throw InvalidArgument("raindrop frequency must be >= 0");
      if (!std::isfinite(d.shape)) throw InvalidArgument("raindrop shape must be finite");
    }
  }
};

// Bilinear scene sample with coordinates clamped to the image.
inline std::array<double, 3> sample_bilinear(const Image& img, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(img.width() - 1));
  y = std::clamp(y, 0.0, static_cast<double>(img.height() - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  std::array<double, 3> out{};
  for (int c = 0; c < 3; ++c) {
    const double top = (1.0 - fx) * img(x0, y0, c) + fx * img(x1, y0, c);
    const double bottom = (1.0 - fx) * img(x0, y1, c) + fx * img(x1, y1, c);
    out[static_cast<std::size_t>(c)] = (1.0 - fy) * top + fy * bottom;
  }
  return out;
}

// Scene coordinate seen through drop `b` at pixel (x, y): the drop center
// offset by the stored field at the drop-local position, scaled by thickness.
inline std::pair<double, double> refracted_coordinate(const Blob& b, const DisplacementField& field,
                                                      int x, int y) {
  const double r = b.bound();
  const auto [du, dv] = field.at((x - b.cx) / r, (y - b.cy) / r);
  return {b.cx + du * b.thickness, b.cy + dv * b.thickness};
}

// Premultiplied RGB + coverage, interleaved 4 samples per pixel.
struct LayerBuffer {
  int width = 0;
  int height = 0;
  std::vector<double> rgba;

  LayerBuffer(int w, int h) : width(w), height(h), rgba(static_cast<std::size_t>(w) * h * 4, 0.0) {}

  void put(int x, int y, double r, double g, double b) {
    double* p = rgba.data() + (static_cast<std::size_t>(y) * width + x) * 4;
    p[0] = r;
    p[1] = g;
    p[2] = b;
    p[3] = 1.0;
  }

  // Blurs and converts to an overlay; color is un-premultiplied by coverage,
  // opacity is the blurred coverage times `opacity`.
  Overlay resolve(double sigma, double opacity = 1.0) && {
    blur_interleaved(rgba, width, height, 4, sigma);
    std::vector<double> color(static_cast<std::size_t>(width) * height * 3, 0.0);
    AlphaMap alpha(width, height, 0.0);
    for (std::size_t p = 0; p < alpha.size(); ++p) {
      const double cov = std::clamp(rgba[4 * p + 3], 0.0, 1.0);
      if (cov > 1e-12) {
        for (std::size_t c = 0; c < 3; ++c) color[3 * p + c] = rgba[4 * p + c] / rgba[4 * p + 3];
      }
      alpha.data()[p] = opacity * cov;
    }
    return {Image(width, height, std::move(color)), std::move(alpha)};
  }
};

inline std::array<BlobKind, 4> drop_kinds(const RaindropParams& params) {
  std::array<BlobKind, 4> kinds{};
  for (std::size_t i = 0; i < 4; ++i)
    kinds[i] = {params.drop_types[i].shape, params.drop_types[i].size, params.drop_types[i].frequency};
  return kinds;
}

// Rasterizes refracting drops at sigma = 0 into a layer buffer. Later drops
// overwrite earlier ones where they overlap.
inline LayerBuffer rasterize_drops(const Image& scene, std::span<const Blob> drops,
                                   const DisplacementField& field) {
  LayerBuffer layer(scene.width(), scene.height());
  for (const Blob& b : drops) {
    for_each_covered(b, scene.width(), scene.height(), [&](int x, int y) {
      const auto [sx, sy] = refracted_coordinate(b, field, x, y);
      const auto rgb = sample_bilinear(scene, sx, sy);
      layer.put(x, y, rgb[0], rgb[1], rgb[2]);
    });
  }
  return layer;
}

inline Overlay render_raindrops(const Image& scene, const RaindropParams& params,
                                const DisplacementField& field, RngStream& rng,
                                const BinaryMask* mask = nullptr) {
  params.validate();
  if (scene.empty()) throw InvalidArgument("render_raindrops: empty scene");
  const auto kinds = drop_kinds(params);
  const auto drops = place_blobs(scene.width(), scene.height(), kinds, params.thickness_min,
                                 params.thickness_max, rng, mask);
  return rasterize_drops(scene, drops, field).resolve(params.sigma);
}

}  // namespace weatherfit
