#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <vector>

#include "weatherfit/error.hpp"
#include "weatherfit/image.hpp"
#include "weatherfit/parallel.hpp"

namespace weatherfit {

// Patch descriptor layout:
//   [0,3)   channel means
//   [3,6)   channel standard deviations (smoothed at zero)
//   [6,14)  soft histogram of luminance gradient magnitude, 8 bins
//   [14]    Laplacian energy of luminance
inline constexpr std::size_t kFeatureCount = 15;
inline constexpr std::size_t kHistBins = 8;
using Features = std::array<double, kFeatureCount>;

namespace features {

inline constexpr double kStdEps = 1e-6;   // std = v / sqrt(v + eps): 0 at v = 0, smooth
inline constexpr double kGradEps = 1e-3;  // |g| = sqrt(gx^2 + gy^2 + eps^2) - eps

// Bin centers grow quadratically so the low-gradient range (where defocus
// acts) is finely resolved; widths follow the center spacing.
inline double bin_center(std::size_t b) {
  const double u = (static_cast<double>(b) + 0.5) / kHistBins;
  return 0.5 * u * u;
}
inline double bin_width(std::size_t b) { return (static_cast<double>(b) + 0.5) / 64.0; }

// Reads a PxP patch with top-left (x0, y0) from interleaved RGB samples.
struct PatchView {
  std::span<const double> samples;
  int image_width;
  int x0;
  int y0;
  int size;

  double at(int i, int j, int c) const noexcept {  // row i, column j
    return samples[(static_cast<std::size_t>(y0 + i) * image_width + (x0 + j)) * 3 + c];
  }
};

inline std::vector<double> luminance(const PatchView& p) {
  std::vector<double> lum(static_cast<std::size_t>(p.size) * p.size);
  for (int i = 0; i < p.size; ++i)
    for (int j = 0; j < p.size; ++j)
      lum[i * p.size + j] = (p.at(i, j, 0) + p.at(i, j, 1) + p.at(i, j, 2)) / 3.0;
  return lum;
}

inline Features compute(const PatchView& p) {
  Features f{};
  const int n = p.size;
  const double count = static_cast<double>(n) * n;
  for (int c = 0; c < 3; ++c) {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) s += p.at(i, j, c);
    const double mean = s / count;
    double v = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) v += (p.at(i, j, c) - mean) * (p.at(i, j, c) - mean);
    v /= count;
    f[c] = mean;
    f[3 + c] = v / std::sqrt(v + kStdEps);
  }

  const auto lum = luminance(p);
  const double grad_count = static_cast<double>(n - 1) * (n - 1);
  for (int i = 0; i + 1 < n; ++i) {
    for (int j = 0; j + 1 < n; ++j) {
      const double gx = lum[i * n + j + 1] - lum[i * n + j];
      const double gy = lum[(i + 1) * n + j] - lum[i * n + j];
      const double g = std::sqrt(gx * gx + gy * gy + kGradEps * kGradEps) - kGradEps;
      for (std::size_t b = 0; b < kHistBins; ++b) {
        const double z = (g - bin_center(b)) / bin_width(b);
        f[6 + b] += std::exp(-0.5 * z * z) / grad_count;
      }
    }
  }

  const double lap_count = static_cast<double>(n - 2) * (n - 2);
  for (int i = 1; i + 1 < n; ++i) {
    for (int j = 1; j + 1 < n; ++j) {
      const double lap = 4.0 * lum[i * n + j] - lum[(i - 1) * n + j] - lum[(i + 1) * n + j] -
                         lum[i * n + j - 1] - lum[i * n + j + 1];
      f[14] += lap * lap / lap_count;
    }
  }
  return f;
}

// Accumulates d(sum_f upstream[f] * f(patch)) / d(sample) into `grad`
// (interleaved RGB, full image layout).
inline void backprop(const PatchView& p, const Features& upstream, std::span<double> grad) {
  const int n = p.size;
  const double count = static_cast<double>(n) * n;
  auto g_at = [&](int i, int j, int c) -> double& {
    return grad[(static_cast<std::size_t>(p.y0 + i) * p.image_width + (p.x0 + j)) * 3 + c];
  };

  for (int c = 0; c < 3; ++c) {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) s += p.at(i, j, c);
    const double mean = s / count;
    double v = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) v += (p.at(i, j, c) - mean) * (p.at(i, j, c) - mean);
    v /= count;
    const double dstd_dv = (v + 2.0 * kStdEps) / (2.0 * std::pow(v + kStdEps, 1.5));
    const double up_mean = upstream[c] / count;
    const double up_var = upstream[3 + c] * dstd_dv * 2.0 / count;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) g_at(i, j, c) += up_mean + up_var * (p.at(i, j, c) - mean);
  }

  const auto lum = luminance(p);
  std::vector<double> dlum(lum.size(), 0.0);
  const double grad_count = static_cast<double>(n - 1) * (n - 1);
  for (int i = 0; i + 1 < n; ++i) {
    for (int j = 0; j + 1 < n; ++j) {
      const double gx = lum[i * n + j + 1] - lum[i * n + j];
      const double gy = lum[(i + 1) * n + j] - lum[i * n + j];
      const double root = std::sqrt(gx * gx + gy * gy + kGradEps * kGradEps);
      const double g = root - kGradEps;
      double dg = 0.0;
      for (std::size_t b = 0; b < kHistBins; ++b) {
        const double w = bin_width(b);
        const double z = (g - bin_center(b)) / w;
        dg += upstream[6 + b] * std::exp(-0.5 * z * z) * (-z / w) / grad_count;
      }
      const double dgx = dg * gx / root;
      const double dgy = dg * gy / root;
      dlum[i * n + j + 1] += dgx;
      dlum[(i + 1) * n + j] += dgy;
      dlum[i * n + j] -= dgx + dgy;
    }
  }

  const double lap_count = static_cast<double>(n - 2) * (n - 2);
  for (int i = 1; i + 1 < n; ++i) {
    for (int j = 1; j + 1 < n; ++j) {
      const double lap = 4.0 * lum[i * n + j] - lum[(i - 1) * n + j] - lum[(i + 1) * n + j] -
                         lum[i * n + j - 1] - lum[i * n + j + 1];
      const double d = upstream[14] * 2.0 * lap / lap_count;
      dlum[i * n + j] += 4.0 * d;
      dlum[(i - 1) * n + j] -= d;
      dlum[(i + 1) * n + j] -= d;
      dlum[i * n + j - 1] -= d;
      dlum[i * n + j + 1] -= d;
    }
  }

  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int c = 0; c < 3; ++c) g_at(i, j, c) += dlum[i * n + j] / 3.0;
}

}  // namespace features

// Non-overlapping patch grid; trailing rows/columns that do not fill a whole
// patch are ignored.
struct PatchGrid {
  int cols = 0;
  int rows = 0;
  int size = 0;

  static PatchGrid of(const Image& img, int patch_size) {
    if (patch_size < 3) throw InvalidArgument("patch size must be at least 3");
    if (img.width() < patch_size || img.height() < patch_size)
      throw InvalidArgument("image is smaller than the critic patch size");
    return {img.width() / patch_size, img.height() / patch_size, patch_size};
  }
  std::size_t count() const noexcept { return static_cast<std::size_t>(cols) * rows; }
  features::PatchView view(const Image& img, std::size_t k) const noexcept {
    return {img.samples(), img.width(), static_cast<int>(k % cols) * size,
            static_cast<int>(k / cols) * size, size};
  }
};

// Features of every patch in row-major grid order.
inline std::vector<Features> patch_features(const Image& img, int patch_size) {
  const auto grid = PatchGrid::of(img, patch_size);
  std::vector<Features> out(grid.count());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = features::compute(grid.view(img, k));
  return out;
}

// d loss / d sample, interleaved RGB in image layout.
struct PixelGradient {
  int width = 0;
  int height = 0;
  std::vector<double> samples;

  double operator()(int x, int y, int c) const noexcept {
    return samples[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
};

struct CriticScore {
  double value = 0.0;
  // One entry per patch; images of a batch are stacked vertically.
  Raster<double> per_patch;
};

inline constexpr double kVarianceFloor = 1e-8;

// Realism scorer fitted to target statistics. Stands in for a frozen
// discriminator: a scalar distance to the target style plus its input
// gradient.
struct Critic {
  int patch_size = 8;
  Features mean{};      // per-feature mean over target patches
  Features variance{};  // per-feature variance over target patches
  Features mean_sq{};   // mean of squared features
  Features variance_sq{};
  double scale = 1.0;

  // Set-level loss used by the estimators.
  double loss(std::span<const Image> images) const;
};

inline Critic critic_fit(std::span<const Image> targets, int patch_size = 8) {
  if (targets.empty()) throw InvalidArgument("critic_fit: empty target list");
  Critic c;
  c.patch_size = patch_size;
  std::vector<Features> all;
  for (const auto& t : targets) {
    auto f = patch_features(t, patch_size);
    all.insert(all.end(), f.begin(), f.end());
  }
  const double n = static_cast<double>(all.size());
  for (const auto& f : all)
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      c.mean[i] += f[i] / n;
      c.mean_sq[i] += f[i] * f[i] / n;
    }
  // Two-pass correction: a constant feature gets its exact value as mean, so
  // a set that matches the targets has exactly zero gradient.
  Features corr{}, corr_sq{};
  for (const auto& f : all)
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      corr[i] += (f[i] - c.mean[i]) / n;
      corr_sq[i] += (f[i] * f[i] - c.mean_sq[i]) / n;
    }
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    c.mean[i] += corr[i];
    c.mean_sq[i] += corr_sq[i];
  }
  for (const auto& f : all)
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      c.variance[i] += (f[i] - c.mean[i]) * (f[i] - c.mean[i]) / n;
      const double d2 = f[i] * f[i] - c.mean_sq[i];
      c.variance_sq[i] += d2 * d2 / n;
    }
  for (double& v : c.variance) v = std::max(v, kVarianceFloor);
  for (double& v : c.variance_sq) v = std::max(v, kVarianceFloor);
  return c;
}

// Per-patch form: each patch's diagonal Mahalanobis distance
// sum_f (f - mu_f)^2 / var_f; value is the mean over patches. Gradients of
// this form are localized to the patches that look unlike the targets.
inline CriticScore critic_score(const Critic& c, const Image& img) {
  const auto grid = PatchGrid::of(img, c.patch_size);
  CriticScore s{0.0, Raster<double>(grid.cols, grid.rows)};
  for (std::size_t k = 0; k < grid.count(); ++k) {
    const Features f = features::compute(grid.view(img, k));
    double d = 0.0;
    for (std::size_t i = 0; i < kFeatureCount; ++i) d += (f[i] - c.mean[i]) * (f[i] - c.mean[i]) / c.variance[i];
    s.per_patch.data()[k] = c.scale * d;
    s.value += c.scale * d;
  }
  s.value /= static_cast<double>(grid.count());
  return s;
}

inline PixelGradient critic_input_gradient(const Critic& c, const Image& img) {
  const auto grid = PatchGrid::of(img, c.patch_size);
  PixelGradient g{img.width(), img.height(), std::vector<double>(img.samples().size(), 0.0)};
  const double inv = c.scale / static_cast<double>(grid.count());
  for (std::size_t k = 0; k < grid.count(); ++k) {
    const auto view = grid.view(img, k);
    const Features f = features::compute(view);
    Features up{};
    for (std::size_t i = 0; i < kFeatureCount; ++i) up[i] = inv * 2.0 * (f[i] - c.mean[i]) / c.variance[i];
    features::backprop(view, up, g.samples);
  }
  return g;
}

namespace detail {

struct PooledFeatures {
  std::vector<std::vector<Features>> per_image;
  Features mean{};
  Features mean_sq{};
  double count = 0.0;
};

inline PooledFeatures pool_features(const Critic& c, std::span<const Image> images) {
  if (images.empty()) throw InvalidArgument("critic: empty image set");
  PooledFeatures p;
  p.per_image.resize(images.size());
  parallel_for(images.size(), [&](std::size_t i) { p.per_image[i] = patch_features(images[i], c.patch_size); });
  for (const auto& fs : p.per_image) p.count += static_cast<double>(fs.size());
  for (const auto& fs : p.per_image)
    for (const auto& f : fs)
      for (std::size_t i = 0; i < kFeatureCount; ++i) {
        p.mean[i] += f[i] / p.count;
        p.mean_sq[i] += f[i] * f[i] / p.count;
      }
  return p;
}

// Loss weights: d value / d pooled first and second moments.
struct MomentWeights {
  Features first{};
  Features second{};
  double value = 0.0;
};

inline MomentWeights moment_weights(const Critic& c, const PooledFeatures& p) {
  MomentWeights w;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    const double d1 = p.mean[i] - c.mean[i];
    const double d2 = p.mean_sq[i] - c.mean_sq[i];
    w.first[i] = c.scale * 2.0 * d1 / c.variance[i];
    w.second[i] = c.scale * 2.0 * d2 / c.variance_sq[i];
    w.value += c.scale * (d1 * d1 / c.variance[i] + d2 * d2 / c.variance_sq[i]);
  }
  return w;
}

}  // namespace detail

// Set form (moment matching): the patch features of all images are pooled and
// value = sum_f (m1_f - mu1_f)^2 / var1_f + (m2_f - mu2_f)^2 / var2_f for the
// pooled first and second moments m1, m2. per_patch holds each patch's signed
// share, whose mean over all patches is the value. Scoring the fitted set
// itself gives 0.
inline CriticScore critic_set_score(const Critic& c, std::span<const Image> images) {
  const auto pooled = detail::pool_features(c, images);
  const auto w = detail::moment_weights(c, pooled);
  CriticScore s;
  s.value = w.value;
  const auto grid = PatchGrid::of(images.front(), c.patch_size);
  std::size_t total_rows = 0;
  for (const auto& img : images) total_rows += static_cast<std::size_t>(img.height() / c.patch_size);
  s.per_patch = Raster<double>(grid.cols, static_cast<int>(total_rows), 0.0);
  std::size_t row = 0;
  for (std::size_t n = 0; n < images.size(); ++n) {
    const auto g = PatchGrid::of(images[n], c.patch_size);
    if (g.cols != grid.cols) throw InvalidArgument("critic: mixed image widths in a batch");
    for (std::size_t k = 0; k < g.count(); ++k) {
      const auto& f = pooled.per_image[n][k];
      double share = 0.0;
      for (std::size_t i = 0; i < kFeatureCount; ++i)
        share += 0.5 * w.first[i] * (f[i] - c.mean[i]) + 0.5 * w.second[i] * (f[i] * f[i] - c.mean_sq[i]);
      s.per_patch(static_cast<int>(k % g.cols), static_cast<int>(row + k / g.cols)) = share;
    }
    row += static_cast<std::size_t>(g.rows);
  }
  return s;
}

// Gradient of critic_set_score(c, images).value with respect to every sample
// of every image.
inline std::vector<PixelGradient> critic_set_gradient(const Critic& c, std::span<const Image> images) {
  const auto pooled = detail::pool_features(c, images);
  const auto w = detail::moment_weights(c, pooled);
  std::vector<PixelGradient> out(images.size());
  parallel_for(images.size(), [&](std::size_t n) {
    const auto& img = images[n];
    const auto grid = PatchGrid::of(img, c.patch_size);
    out[n] = {img.width(), img.height(), std::vector<double>(img.samples().size(), 0.0)};
    for (std::size_t k = 0; k < grid.count(); ++k) {
      const auto& f = pooled.per_image[n][k];
      Features up{};
      for (std::size_t i = 0; i < kFeatureCount; ++i)
        up[i] = (w.first[i] + w.second[i] * 2.0 * f[i]) / pooled.count;
      features::backprop(grid.view(img, k), up, out[n].samples);
    }
  });
  return out;
}

inline double Critic::loss(std::span<const Image> images) const {
  return critic_set_score(*this, images).value;
}

// Binary `.critic` file: "WFCRITIC", u32 version, u32 patch_size,
// u32 feature_count, then little-endian f64 arrays: means, variances, means
// of squares, variances of squares.
inline constexpr char kCriticMagic[8] = {'W', 'F', 'C', 'R', 'I', 'T', 'I', 'C'};
inline constexpr std::uint32_t kCriticVersion = 1;

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_f64(std::ostream& out, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline std::uint64_t get_le(std::istream& in, int bytes, const std::filesystem::path& path) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int ch = in.get();
    if (ch == std::char_traits<char>::eof()) throw IoError(path.string() + ": truncated critic file");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(ch)) << (8 * i);
  }
  return v;
}

}  // namespace detail

inline void save_critic(const Critic& c, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out.write(kCriticMagic, sizeof kCriticMagic);
  detail::put_u32(out, kCriticVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(c.patch_size));
  detail::put_u32(out, static_cast<std::uint32_t>(kFeatureCount));
  for (const auto* arr : {&c.mean, &c.variance, &c.mean_sq, &c.variance_sq})
    for (double v : *arr) detail::put_f64(out, v);
  detail::put_f64(out, c.scale);
  if (!out) throw IoError(path.string() + ": write failed");
}

inline Critic load_critic(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": file not found");
  char magic[8] = {};
  in.read(magic, sizeof magic);
  if (in.gcount() != 8 || std::memcmp(magic, kCriticMagic, 8) != 0)
    throw IoError(path.string() + ": not a critic file");
  if (detail::get_le(in, 4, path) != kCriticVersion) throw IoError(path.string() + ": unsupported critic version");
  Critic c;
  c.patch_size = static_cast<int>(detail::get_le(in, 4, path));
  if (detail::get_le(in, 4, path) != kFeatureCount) throw IoError(path.string() + ": unexpected feature count");
  for (auto* arr : {&c.mean, &c.variance, &c.mean_sq, &c.variance_sq})
    for (double& v : *arr) v = std::bit_cast<double>(detail::get_le(in, 8, path));
  c.scale = std::bit_cast<double>(detail::get_le(in, 8, path));
  if (!(c.scale > 0.0) || !std::isfinite(c.scale)) throw IoError(path.string() + ": invalid critic scale");
  return c;
}

}  // namespace weatherfit
