#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "weatherfit/blur.hpp"
#include "weatherfit/critic.hpp"
#include "weatherfit/parallel.hpp"

namespace weatherfit {

// Dataset-level saliency in [0,1]: high where the critic reacts most, i.e.
// where sources and targets differ.
using GuidanceMap = Raster<double>;

inline constexpr double kGuidanceZero = 1e-12;

// Mean over `sources` of the per-pixel |d score / d input| (summed over
// channels, blurred with sigma = patch size), min-max normalized over the
// whole map. A map whose maximum is below kGuidanceZero is all zeros.
inline GuidanceMap compute_guidance(const Critic& critic, std::span<const Image> sources) {
  if (sources.empty()) throw InvalidArgument("compute_guidance: empty source list");
  const int w = sources[0].width(), h = sources[0].height();
  for (const auto& s : sources)
    if (s.width() != w || s.height() != h) throw InvalidArgument("compute_guidance: mixed image sizes");

  std::vector<Raster<double>> maps(sources.size());
  parallel_for(sources.size(), [&](std::size_t i) {
    const auto g = critic_input_gradient(critic, sources[i]);
    Raster<double> m(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) m(x, y) = std::abs(g(x, y, 0)) + std::abs(g(x, y, 1)) + std::abs(g(x, y, 2));
    maps[i] = gaussian_blur(m, static_cast<double>(critic.patch_size));
  });

  GuidanceMap dg(w, h, 0.0);
  auto out = dg.data();
  for (const auto& m : maps) {
    const auto d = m.data();
    for (std::size_t p = 0; p < out.size(); ++p) out[p] += d[p];
  }
  for (double& v : out) v /= static_cast<double>(maps.size());

  const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
  const double min = *lo, max = *hi;
  if (max < kGuidanceZero) {
    std::fill(out.begin(), out.end(), 0.0);
    return dg;
  }
  const double range = max - min;
  for (double& v : out) v = range > 0.0 ? (v - min) / range : 1.0;
  return dg;
}

// Injection allowed where dg < gamma; gamma = 0 forbids injection everywhere.
inline BinaryMask injection_mask(const GuidanceMap& dg, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw InvalidArgument("injection_mask: gamma must lie in [0, 1]");
  BinaryMask mask(dg.width(), dg.height(), 0);
  const auto in = dg.data();
  auto out = mask.data();
  for (std::size_t p = 0; p < in.size(); ++p) out[p] = in[p] < gamma ? 1 : 0;
  return mask;
}

}  // namespace weatherfit
