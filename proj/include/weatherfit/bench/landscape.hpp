#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <span>
#include <string>
#include <vector>

#include "weatherfit/bench/recovery.hpp"

namespace weatherfit::bench {

namespace detail {

struct Gaussian {
  Features mean{};
  Features variance{};
};

inline Gaussian fit_gaussian(std::span<const Image> images, int patch) {
  if (images.empty()) throw InvalidArgument("feature_distance: empty image set");
  std::vector<Features> all;
  for (const auto& img : images) {
    auto f = patch_features(img, patch);
    all.insert(all.end(), f.begin(), f.end());
  }
  Gaussian g;
  const double n = static_cast<double>(all.size());
  for (const auto& f : all)
    for (std::size_t i = 0; i < kFeatureCount; ++i) g.mean[i] += f[i] / n;
  for (const auto& f : all)
    for (std::size_t i = 0; i < kFeatureCount; ++i) g.variance[i] += (f[i] - g.mean[i]) * (f[i] - g.mean[i]) / n;
  return g;
}

}  // namespace detail

// Frechet distance between diagonal Gaussian fits of the pooled patch
// features, sum_f [(mu_a - mu_b)^2 + (sd_a - sd_b)^2] / u_f. Each feature is
// measured in units of its average variance u_f = (var_a + var_b) / 2 so the
// small-valued structure features are not swamped by the color means.
inline double feature_distance(std::span<const Image> a, std::span<const Image> b, int patch = 8) {
  const auto ga = detail::fit_gaussian(a, patch), gb = detail::fit_gaussian(b, patch);
  double d = 0.0;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    const double unit = std::max(0.5 * (ga.variance[i] + gb.variance[i]), kVarianceFloor);
    const double dm = ga.mean[i] - gb.mean[i];
    const double ds = std::sqrt(ga.variance[i]) - std::sqrt(gb.variance[i]);
    d += (dm * dm + ds * ds) / unit;
  }
  return d;
}

struct LandscapePoint {
  double value = 0.0;
  double distance = 0.0;
};

// Renders `clean` with the single free parameter of `model` set to each grid
// value (shared render seeds across the grid) and measures the feature
// distance to `targets`.
template <EstimableModel M>
  requires requires(const M& m) {
    m.diff_slots();
    m.nondiff_slots();
  }
std::vector<LandscapePoint> sweep_landscape(std::span<const Scene> clean, std::span<const Image> targets,
                                            const M& model, std::string_view parameter, std::span<const double> grid,
                                            std::uint64_t seed, int patch = 8) {
  if (grid.size() < 3) throw InvalidArgument("sweep_landscape: grid needs at least 3 points");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (grid[i] < grid[i - 1]) throw InvalidArgument("sweep_landscape: grid must be sorted");
  const auto& d = model.diff_slots();
  const auto& nd = model.nondiff_slots();
  if (d.size() + nd.size() != 1 || (d.empty() ? nd[0].name : d[0].name) != parameter)
    throw InvalidArgument("sweep_landscape: model must have exactly the swept parameter free");
  if (clean.empty()) throw InvalidArgument("sweep_landscape: empty clean set");

  RngStream rng(seed);
  const auto seeds = draw_seeds(rng, clean.size());
  std::vector<LandscapePoint> out;
  for (double v : grid) {
    ModelParams w = model.initial(seed);
    (d.empty() ? w.non_differentiable : w.differentiable)[0] = v;
    std::vector<Image> rendered(clean.size());
    parallel_for(clean.size(), [&](std::size_t i) {
      RngStream r(seeds[i]);
      rendered[i] = compose(clean[i].image, model.render(clean[i], w, r));
    });
    out.push_back({v, feature_distance(rendered, targets, patch)});
  }
  return out;
}

inline std::size_t argmin_distance(std::span<const LandscapePoint> pts) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (pts[i].distance < pts[best].distance) best = i;
  return best;
}

inline void write_recovery_csv(std::span<const RecoveryReport> reports, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << "model,parameter,ground_truth,estimated,percent_error,seed,seconds\n" << std::setprecision(9);
  for (const auto& r : reports)
    out << r.model << ',' << r.parameter << ',' << r.ground_truth << ',' << r.estimated << ',' << r.percent_error
        << ',' << r.seed << ',' << r.seconds << '\n';
  if (!out) throw IoError(path.string() + ": write failed");
}

struct LandscapeCurve {
  std::string model;
  std::string parameter;
  double ground_truth = 0.0;
  std::vector<LandscapePoint> points;
};

inline void write_landscape_csv(std::span<const LandscapeCurve> curves, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << "model,parameter,ground_truth,value,distance\n" << std::setprecision(9);
  for (const auto& c : curves)
    for (const auto& p : c.points)
      out << c.model << ',' << c.parameter << ',' << c.ground_truth << ',' << p.value << ',' << p.distance << '\n';
  if (!out) throw IoError(path.string() + ": write failed");
}

}  // namespace weatherfit::bench
