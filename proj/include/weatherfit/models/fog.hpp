#pragma once

#include <array>
#include <cmath>

#include "weatherfit/models/overlay.hpp"

namespace weatherfit {

struct FogParams {
  double beta = 0.0;  // extinction coefficient, inverse depth units
  std::array<double, 3> atmospheric_light{0.9, 0.9, 0.92};

  void validate() const {
    if (!std::isfinite(beta) || beta < 0.0) throw InvalidArgument("fog beta must be >= 0");
    for (double a : atmospheric_light)
      if (!(a >= 0.0 && a <= 1.0)) throw InvalidArgument("atmospheric light must lie in [0,1]");
  }
};

// Distance at which contrast falls to 5%: ln(20) / beta.
inline double max_visibility(double beta) {
  return beta > 0.0 ? std::log(20.0) / beta : DepthMap::kSky;
}

inline double beta_for_visibility(double visibility) { return std::log(20.0) / visibility; }

// Transmittance exp(-beta d); alpha_w = 1 - transmittance, color = airlight.
inline Overlay render_fog(const Image& scene, const DepthMap& depth, const FogParams& params) {
  params.validate();
  if (!scene.same_shape(depth.width(), depth.height()))
    throw InvalidArgument("render_fog: depth map dimensions differ from the scene");
  const auto& a = params.atmospheric_light;
  Overlay out{Image::filled(scene.width(), scene.height(), a[0], a[1], a[2]),
              AlphaMap(scene.width(), scene.height(), 0.0)};
  const auto d = depth.raster().data();
  auto alpha = out.alpha.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (std::isinf(d[i])) {
      alpha[i] = params.beta > 0.0 ? 1.0 : 0.0;
    } else {
      alpha[i] = -std::expm1(-params.beta * d[i]);
    }
  }
  return out;
}

}  // namespace weatherfit
