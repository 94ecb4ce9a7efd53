#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "weatherfit/model.hpp"
#include "weatherfit/rng.hpp"

namespace weatherfit::bench {

// Procedural street-like scenes: a gradient sky at infinite depth, a
// textured ground plane receding to the horizon, and a few buildings and
// trees standing on it. Depth is expressed in kilometers. Appearance varies
// modestly between scenes, as in footage from one camera on one route.
struct CorpusOptions {
  int width = 128;
  int height = 128;
  double horizon_depth_km = 0.4;  // ground depth one row below the horizon
  double variety = 1.0;           // scales per-scene color and horizon jitter
};

namespace detail {

// Bilinear value noise on a lattice of spacing `cell`.
class ValueNoise {
 public:
  ValueNoise(RngStream& rng, int w, int h, double cell)
      : cols_(static_cast<int>(w / cell) + 2), rows_(static_cast<int>(h / cell) + 2), cell_(cell),
        lattice_(static_cast<std::size_t>(cols_) * rows_) {
    for (double& v : lattice_) v = rng.uniform(-1.0, 1.0);
  }

  double operator()(double x, double y) const {
    const double gx = std::clamp(x / cell_, 0.0, cols_ - 1.001);
    const double gy = std::clamp(y / cell_, 0.0, rows_ - 1.001);
    const int x0 = static_cast<int>(gx), y0 = static_cast<int>(gy);
    const double fx = smooth(gx - x0), fy = smooth(gy - y0);
    auto at = [&](int i, int j) { return lattice_[static_cast<std::size_t>(j) * cols_ + i]; };
    return (1 - fy) * ((1 - fx) * at(x0, y0) + fx * at(x0 + 1, y0)) +
           fy * ((1 - fx) * at(x0, y0 + 1) + fx * at(x0 + 1, y0 + 1));
  }

 private:
  static double smooth(double t) { return t * t * (3.0 - 2.0 * t); }
  int cols_;
  int rows_;
  double cell_;
  std::vector<double> lattice_;
};

using Rgb = std::array<double, 3>;

inline Rgb jitter(const Rgb& base, RngStream& rng, double amount) {
  Rgb c{};
  for (std::size_t i = 0; i < 3; ++i) c[i] = std::clamp(base[i] + rng.uniform(-amount, amount), 0.0, 1.0);
  return c;
}

}  // namespace detail

inline Scene make_scene(RngStream& rng, const CorpusOptions& opt = {}) {
  const int w = opt.width, h = opt.height;
  std::vector<double> px(Image::sample_count(w, h));
  Raster<double> depth(w, h, DepthMap::kSky);
  auto put = [&](int x, int y, const detail::Rgb& c) {
    for (std::size_t k = 0; k < 3; ++k)
      px[(static_cast<std::size_t>(y) * w + x) * 3 + k] = std::clamp(c[k], 0.0, 1.0);
  };

  const double v = opt.variety;
  const int horizon = static_cast<int>((0.45 + rng.uniform(-0.04, 0.04) * v) * h);
  const detail::Rgb sky_top = detail::jitter({0.35, 0.5, 0.78}, rng, 0.032 * v);
  const detail::Rgb sky_low = detail::jitter({0.75, 0.8, 0.86}, rng, 0.024 * v);
  const detail::Rgb ground = detail::jitter({0.38, 0.37, 0.35}, rng, 0.032 * v);
  const detail::Rgb verge = detail::jitter({0.3, 0.45, 0.22}, rng, 0.032 * v);
  const detail::ValueNoise coarse(rng, w, h, 9.0);
  const detail::ValueNoise fine(rng, w, h, 2.5);
  const double road_half = rng.uniform(0.25, 0.4);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (y < horizon) {
        const double t = static_cast<double>(y) / std::max(1, horizon);
        detail::Rgb c{};
        for (std::size_t k = 0; k < 3; ++k) c[k] = (1 - t) * sky_top[k] + t * sky_low[k];
        const double cloud = 0.06 * std::max(0.0, coarse(x * 0.6, y * 1.8));
        put(x, y, {c[0] + cloud, c[1] + cloud, c[2] + cloud});
        continue;
      }
      const double rows_below = y - horizon + 1.0;
      const double d = opt.horizon_depth_km / rows_below;
      depth(x, y) = d;
      // Perspective: lateral offset from the image center shrinks with depth.
      const double lateral = (x - 0.5 * w) / (rows_below * 1.2);
      const bool road = std::abs(lateral) < road_half * w / 40.0;
      const detail::Rgb& base = road ? ground : verge;
      const double grain = 0.08 * fine(x, y) + 0.05 * coarse(x, y * 2.0);
      detail::Rgb c{base[0] + grain, base[1] + grain, base[2] + grain};
      if (road && std::abs(lateral) < 0.04 * w / 40.0 && static_cast<int>(std::log(rows_below) * 6) % 2 == 0)
        c = {0.85, 0.85, 0.8};
      put(x, y, c);
    }
  }

  // Buildings: rectangles rising from a ground row, at that row's depth.
  const int buildings = 2 + static_cast<int>(rng.below(3));
  for (int b = 0; b < buildings; ++b) {
    const int base_row = std::min(h - 1, horizon + 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, h / 6)))));
    const double d = opt.horizon_depth_km / (base_row - horizon + 1.0);
    const int bw = 8 + static_cast<int>(rng.below(static_cast<std::uint64_t>(w / 4)));
    const int bh = 10 + static_cast<int>(rng.below(static_cast<std::uint64_t>(h / 3)));
    const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(w)));
    const detail::Rgb wall = detail::jitter({0.55, 0.5, 0.45}, rng, 0.08 * v);
    const detail::Rgb window = detail::jitter({0.2, 0.22, 0.28}, rng, 0.032 * v);
    for (int y = std::max(0, base_row - bh); y <= base_row; ++y) {
      for (int x = x0; x < std::min(w, x0 + bw); ++x) {
        const bool win = (x - x0) % 5 >= 2 && (base_row - y) % 6 >= 3 && x - x0 > 1 && x0 + bw - x > 2;
        put(x, y, win ? window : wall);
        depth(x, y) = d;
      }
    }
  }

  // Trees: discs on trunks.
  const int trees = 1 + static_cast<int>(rng.below(3));
  for (int t = 0; t < trees; ++t) {
    const int base_row = std::min(h - 1, horizon + 4 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, h / 4)))));
    const double d = opt.horizon_depth_km / (base_row - horizon + 1.0);
    const double r = 4.0 + rng.uniform(0.0, 8.0) * (base_row - horizon) / (0.25 * h);
    const double cx = rng.uniform(0.0, w);
    const double cy = base_row - 2.2 * r;
    const detail::Rgb leaf = detail::jitter({0.2, 0.4, 0.15}, rng, 0.028 * v);
    for (int y = std::max(0, static_cast<int>(cy - r)); y <= base_row && y < h; ++y) {
      for (int x = std::max(0, static_cast<int>(cx - r)); x <= std::min(w - 1, static_cast<int>(cx + r)); ++x) {
        const double dx = x - cx, dy = y - cy;
        const bool crown = dx * dx + dy * dy <= r * r;
        const bool trunk = std::abs(dx) <= std::max(1.0, r * 0.15) && y > cy;
        if (!crown && !trunk) continue;
        const double shade = 0.1 * fine(x * 2.0, y * 2.0);
        put(x, y, crown ? detail::Rgb{leaf[0] + shade, leaf[1] + shade, leaf[2] + shade}
                        : detail::Rgb{0.3, 0.22, 0.15});
        depth(x, y) = d;
      }
    }
  }

  return {Image(w, h, std::move(px)), DepthMap(std::move(depth))};
}

inline std::vector<Scene> make_corpus(std::size_t count, std::uint64_t seed, const CorpusOptions& opt = {}) {
  std::vector<Scene> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    RngStream rng(derive_seed(seed, 0x5ce9e0000ULL + i));
    out.push_back(make_scene(rng, opt));
  }
  return out;
}

}  // namespace weatherfit::bench
