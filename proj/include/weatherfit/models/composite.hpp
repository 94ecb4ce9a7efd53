#pragma once

#include <cmath>
#include <utility>

#include "weatherfit/models/overlay.hpp"
#include "weatherfit/rng.hpp"

namespace weatherfit {

// Thin occluder of known transparency (watermark, fence). Nothing to fit.
struct CompositeParams {
  Image overlay_image;
  AlphaMap overlay_alpha;

  void validate() const {
    if (!overlay_image.same_shape(overlay_alpha))
      throw InvalidArgument("composite overlay image and alpha dimensions differ");
    for (double a : overlay_alpha.data())
      if (!(a >= 0.0 && a <= 1.0)) throw InvalidArgument("composite alpha must lie in [0,1]");
  }
};

// Offset drawn uniformly among positions keeping the overlay inside the scene.
inline std::pair<int, int> draw_translation(int scene_w, int scene_h, int overlay_w, int overlay_h,
                                            RngStream& rng) {
  if (overlay_w > scene_w || overlay_h > scene_h)
    throw InvalidArgument("composite overlay is larger than the scene");
  const int dx = static_cast<int>(rng.below(static_cast<std::uint64_t>(scene_w - overlay_w) + 1));
  const int dy = static_cast<int>(rng.below(static_cast<std::uint64_t>(scene_h - overlay_h) + 1));
  return {dx, dy};
}

inline Overlay render_composite(const Image& scene, const CompositeParams& params, RngStream& rng) {
  params.validate();
  const int ow = params.overlay_image.width();
  const int oh = params.overlay_image.height();
  const auto [dx, dy] = draw_translation(scene.width(), scene.height(), ow, oh, rng);
  std::vector<double> color(Image::sample_count(scene.width(), scene.height()), 0.0);
  AlphaMap alpha(scene.width(), scene.height(), 0.0);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      const std::size_t p = static_cast<std::size_t>(y + dy) * scene.width() + (x + dx);
      for (int c = 0; c < 3; ++c) color[3 * p + c] = params.overlay_image(x, y, c);
      alpha.data()[p] = params.overlay_alpha(x, y);
    }
  }
  return {Image(scene.width(), scene.height(), std::move(color)), std::move(alpha)};
}

// A fence-like grid of opaque bars, period `spacing`, bar width `bar`.
inline CompositeParams fence_occluder(int width, int height, int spacing, int bar,
                                      double opacity = 1.0) {
  CompositeParams p{Image::filled(width, height, 0.25, 0.22, 0.2), AlphaMap(width, height, 0.0)};
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      if (x % spacing < bar || y % spacing < bar) p.overlay_alpha(x, y) = opacity;
  return p;
}

// A translucent bright rectangle with a darker border, standing in for a watermark.
inline CompositeParams watermark_occluder(int width, int height, double opacity = 0.35) {
  CompositeParams p{Image::filled(width, height, 0.95, 0.95, 0.95), AlphaMap(width, height, opacity)};
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      if (x < 2 || y < 2 || x >= width - 2 || y >= height - 2) {
        for (int c = 0; c < 3; ++c) p.overlay_image.set(x, y, c, 0.3);
        p.overlay_alpha(x, y) = std::min(1.0, 2.0 * opacity);
      }
  return p;
}

}  // namespace weatherfit
