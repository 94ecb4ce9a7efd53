#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "weatherfit/error.hpp"

namespace weatherfit {

// Single-channel row-major raster.
template <typename T>
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(checked_size(width, height), fill) {}
  Raster(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != checked_size(width, height))
      throw InvalidArgument("raster data size does not match dimensions");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int x, int y) noexcept { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const noexcept { return data_[index(x, y)]; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  bool same_shape(int w, int h) const noexcept { return width_ == w && height_ == h; }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  static std::size_t checked_size(int w, int h) {
    if (w < 0 || h < 0) throw InvalidArgument("negative raster dimensions");
    return static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  }
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

// Per-pixel opacity in [0,1].
using AlphaMap = Raster<double>;
// true (1) where model injection is allowed.
using BinaryMask = Raster<std::uint8_t>;

// RGB image with samples in [0,1], interleaved row-major. The constructor
// clamps and rejects non-finite samples, so every Image in circulation
// satisfies the range invariant.
class Image {
 public:
  static constexpr int kChannels = 3;

  Image() = default;
  Image(int width, int height, double fill = 0.0)
      : Image(width, height,
              std::vector<double>(sample_count(width, height), fill)) {}
  Image(int width, int height, std::vector<double> samples)
      : width_(width), height_(height), data_(std::move(samples)) {
    if (data_.size() != sample_count(width, height))
      throw InvalidArgument("image sample count does not match dimensions");
    for (double& v : data_) {
      if (!std::isfinite(v)) throw NumericError("non-finite image sample");
      v = std::clamp(v, 0.0, 1.0);
    }
  }

  static Image filled(int width, int height, double r, double g, double b) {
    std::vector<double> s(sample_count(width, height));
    for (std::size_t i = 0; i < s.size(); i += 3) {
      s[i] = r;
      s[i + 1] = g;
      s[i + 2] = b;
    }
    return Image(width, height, std::move(s));
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t pixel_count() const noexcept { return data_.size() / kChannels; }

  double operator()(int x, int y, int c) const noexcept { return data_[index(x, y, c)]; }

  void set(int x, int y, int c, double v) {
    if (!std::isfinite(v)) throw NumericError("non-finite image sample");
    data_[index(x, y, c)] = std::clamp(v, 0.0, 1.0);
  }

  std::span<const double> samples() const noexcept { return data_; }
  // Moves the sample buffer out, leaving the image empty.
  std::vector<double> release() && { return std::move(data_); }

  bool same_shape(int w, int h) const noexcept { return width_ == w && height_ == h; }
  template <typename T>
  bool same_shape(const Raster<T>& r) const noexcept {
    return same_shape(r.width(), r.height());
  }
  bool same_shape(const Image& o) const noexcept { return same_shape(o.width_, o.height_); }

  friend bool operator==(const Image&, const Image&) = default;

  static std::size_t sample_count(int w, int h) {
    if (w < 0 || h < 0) throw InvalidArgument("negative image dimensions");
    return static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * kChannels;
  }

 private:
  std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) * kChannels + static_cast<std::size_t>(c);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

// Scene depth in consistent length units; +infinity marks sky.
class DepthMap {
 public:
  static constexpr double kSky = std::numeric_limits<double>::infinity();

  DepthMap() = default;
  explicit DepthMap(Raster<double> depth) : depth_(std::move(depth)) {
    for (double d : depth_.data()) {
      if (std::isnan(d) || !(d > 0.0)) throw InvalidArgument("non-positive depth");
    }
  }

  int width() const noexcept { return depth_.width(); }
  int height() const noexcept { return depth_.height(); }
  double operator()(int x, int y) const noexcept { return depth_(x, y); }
  const Raster<double>& raster() const noexcept { return depth_; }

 private:
  Raster<double> depth_;
};

// Mean over all samples of all channels.
inline double mean(const Image& img) {
  double s = 0.0;
  for (double v : img.samples()) s += v;
  return img.empty() ? 0.0 : s / static_cast<double>(img.samples().size());
}

inline double variance(const Image& img) {
  const double m = mean(img);
  double s = 0.0;
  for (double v : img.samples()) s += (v - m) * (v - m);
  return img.empty() ? 0.0 : s / static_cast<double>(img.samples().size());
}

inline double max_abs_diff(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw InvalidArgument("image dimension mismatch");
  double m = 0.0;
  auto sa = a.samples();
  auto sb = b.samples();
  for (std::size_t i = 0; i < sa.size(); ++i) m = std::max(m, std::abs(sa[i] - sb[i]));
  return m;
}

}  // namespace weatherfit
