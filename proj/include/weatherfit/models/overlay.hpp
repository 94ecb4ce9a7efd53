#pragma once

#include <algorithm>
#include <vector>

#include "weatherfit/error.hpp"
#include "weatherfit/image.hpp"

namespace weatherfit {

// A rendered occlusion layer: color W and opacity alpha_w, both scene-sized.
struct Overlay {
  Image color;
  AlphaMap alpha;

  static Overlay transparent(int width, int height) {
    return {Image(width, height), AlphaMap(width, height, 0.0)};
  }
};

// out = (1 - alpha_w) * scene + alpha_w * W, per pixel and channel.
// alpha_w is the layer opacity: 1 shows only the occluder.
inline Image compose(const Image& scene, const Overlay& overlay) {
  if (!scene.same_shape(overlay.color) || !scene.same_shape(overlay.alpha))
    throw InvalidArgument("compose: scene and overlay dimensions differ");
  const auto s = scene.samples();
  const auto w = overlay.color.samples();
  const auto a = overlay.alpha.data();
  std::vector<double> out(s.size());
  for (std::size_t p = 0; p < a.size(); ++p) {
    const double alpha = std::clamp(a[p], 0.0, 1.0);
    for (std::size_t c = 0; c < 3; ++c) {
      const std::size_t i = 3 * p + c;
      out[i] = (1.0 - alpha) * s[i] + alpha * w[i];
    }
  }
  return Image(scene.width(), scene.height(), std::move(out));
}

}  // namespace weatherfit
