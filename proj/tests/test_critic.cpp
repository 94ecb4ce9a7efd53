#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "weatherfit/bench/corpus.hpp"
#include "weatherfit/critic.hpp"
#include "weatherfit/models/fog.hpp"
#include "weatherfit/rng.hpp"

using namespace weatherfit;

namespace {

Image random_image(int w, int h, std::uint64_t seed, double lo = 0.05, double hi = 0.95) {
  RngStream rng(seed);
  std::vector<double> s(Image::sample_count(w, h));
  for (double& v : s) v = rng.uniform(lo, hi);
  return Image(w, h, std::move(s));
}

std::vector<Image> corpus_images(std::size_t n, std::uint64_t seed, int size = 64) {
  bench::CorpusOptions opt;
  opt.width = opt.height = size;
  std::vector<Image> out;
  for (auto& s : bench::make_corpus(n, seed, opt)) out.push_back(std::move(s.image));
  return out;
}

double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Central-difference oracle of f with respect to every sample of `img`.
template <class F>
std::vector<double> numeric_gradient(const Image& img, F&& f, double h = 1e-3) {
  std::vector<double> base(img.samples().begin(), img.samples().end());
  std::vector<double> out(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    auto plus = base, minus = base;
    plus[i] += h;
    minus[i] -= h;
    out[i] = (f(Image(img.width(), img.height(), std::move(plus))) -
              f(Image(img.width(), img.height(), std::move(minus)))) /
             (2.0 * h);
  }
  return out;
}

double relative_inf_error(std::span<const double> analytic, std::span<const double> numeric) {
  std::vector<double> diff(analytic.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = analytic[i] - numeric[i];
  return inf_norm(diff) / std::max(inf_norm(numeric), 1e-300);
}

}  // namespace

TEST(CriticFit, ConstantTargets) {
  const std::vector<Image> targets{Image::filled(16, 16, 0.2, 0.4, 0.6)};
  const auto c = critic_fit(targets, 8);
  EXPECT_NEAR(c.mean[0], 0.2, 1e-12);
  EXPECT_NEAR(c.mean[1], 0.4, 1e-12);
  EXPECT_NEAR(c.mean[2], 0.6, 1e-12);
  for (std::size_t i = 3; i < 6; ++i) EXPECT_NEAR(c.mean[i], 0.0, 1e-12);
  EXPECT_NEAR(c.mean[14], 0.0, 1e-12);
  for (double v : c.variance) EXPECT_EQ(v, kVarianceFloor);
  // Flat patches put all gradient mass near the first bin.
  EXPECT_GT(c.mean[6], c.mean[7]);
}

TEST(CriticFit, Errors) {
  EXPECT_THROW(critic_fit(std::vector<Image>{}), InvalidArgument);
  const std::vector<Image> tiny{Image(6, 6)};
  EXPECT_THROW(critic_fit(tiny, 8), InvalidArgument);
  EXPECT_THROW(critic_fit(tiny, 2), InvalidArgument);
}

TEST(CriticScore, FittedSetScoresZero) {
  const auto targets = corpus_images(6, 11);
  const auto c = critic_fit(targets);
  EXPECT_LT(critic_set_score(c, targets).value, 1e-3);
  EXPECT_LT(c.loss(targets), 1e-12);
}

TEST(CriticScore, MembersBeatFoggedMembers) {
  bench::CorpusOptions opt;
  opt.width = opt.height = 64;
  const auto scenes = bench::make_corpus(6, 12, opt);
  std::vector<Image> clean, fogged;
  for (const auto& s : scenes) {
    clean.push_back(s.image);
    fogged.push_back(compose(s.image, render_fog(s.image, *s.depth, {8.0, {0.9, 0.9, 0.92}})));
  }
  const auto c = critic_fit(clean);
  for (std::size_t i = 0; i < clean.size(); ++i)
    EXPECT_LT(critic_score(c, clean[i]).value, critic_score(c, fogged[i]).value) << i;
  EXPECT_LT(c.loss(clean), c.loss(fogged));

  // Per-patch Mahalanobis scores of members average to the feature count.
  double mean_member = 0.0;
  for (const auto& img : clean) mean_member += critic_score(c, img).value / clean.size();
  EXPECT_NEAR(mean_member, static_cast<double>(kFeatureCount), 1e-9);
}

TEST(CriticScore, DeterministicAndPerPatchShape) {
  const auto targets = corpus_images(3, 13);
  const auto c = critic_fit(targets);
  const auto a = critic_score(c, targets[1]);
  const auto b = critic_score(c, targets[1]);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.per_patch, b.per_patch);
  EXPECT_EQ(a.per_patch.width(), 8);
  EXPECT_EQ(a.per_patch.height(), 8);
  double sum = 0.0;
  for (double v : a.per_patch.data()) sum += v;
  EXPECT_NEAR(sum / 64.0, a.value, 1e-12);

  const auto set = critic_set_score(c, targets);
  EXPECT_EQ(set.per_patch.height(), 24);
}

TEST(CriticScore, InvariantToPatchOrder) {
  // Swapping two whole patches changes neither form's value.
  const auto targets = corpus_images(3, 14, 32);
  const auto c = critic_fit(targets);
  const auto& img = targets[0];
  std::vector<double> swapped(img.samples().begin(), img.samples().end());
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      for (int ch = 0; ch < 3; ++ch)
        std::swap(swapped[(static_cast<std::size_t>(y) * 32 + x) * 3 + ch],
                  swapped[(static_cast<std::size_t>(y + 16) * 32 + x + 8) * 3 + ch]);
  const Image other(32, 32, std::move(swapped));
  EXPECT_NEAR(critic_score(c, img).value, critic_score(c, other).value, 1e-12);
  const std::vector<Image> a{img}, b{other};
  EXPECT_NEAR(c.loss(a), c.loss(b), 1e-12);

  // Reordering the batch is also a permutation of patches.
  const std::vector<Image> fwd{targets[0], targets[1], targets[2]};
  const std::vector<Image> rev{targets[2], targets[0], targets[1]};
  EXPECT_NEAR(c.loss(fwd), c.loss(rev), 1e-12);
}

TEST(CriticGradient, ZeroWhenStatisticsMatch) {
  const std::vector<Image> targets{Image::filled(16, 16, 0.3, 0.5, 0.7)};
  const auto c = critic_fit(targets);
  const auto g = critic_input_gradient(c, targets[0]);
  EXPECT_LT(inf_norm(g.samples), 1e-12);
  const auto gs = critic_set_gradient(c, targets);
  EXPECT_LT(inf_norm(gs[0].samples), 1e-12);
}

TEST(CriticGradient, PerPatchMatchesFiniteDifferences) {
  const auto c = critic_fit(corpus_images(4, 15, 32), 8);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto img = random_image(16, 16, 100 + seed);
    const auto analytic = critic_input_gradient(c, img);
    const auto numeric = numeric_gradient(img, [&](const Image& x) { return critic_score(c, x).value; });
    EXPECT_LE(relative_inf_error(analytic.samples, numeric), 1e-3) << seed;
  }
}

TEST(CriticGradient, SetFormMatchesFiniteDifferences) {
  const auto c = critic_fit(corpus_images(4, 16, 32), 8);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::vector<Image> batch{random_image(16, 16, 200 + seed), random_image(16, 16, 300 + seed)};
    const auto analytic = critic_set_gradient(c, batch);
    const auto numeric = numeric_gradient(batch[0], [&](const Image& x) {
      const std::vector<Image> b{x, batch[1]};
      return c.loss(b);
    });
    EXPECT_LE(relative_inf_error(analytic[0].samples, numeric), 1e-3) << seed;
  }
}

TEST(CriticGradient, ScalesWithCriticScale) {
  auto c = critic_fit(corpus_images(3, 17, 32));
  const auto img = random_image(32, 32, 5);
  const auto g1 = critic_input_gradient(c, img);
  const double v1 = critic_score(c, img).value;
  c.scale = 3.5;
  const auto g2 = critic_input_gradient(c, img);
  EXPECT_NEAR(critic_score(c, img).value, 3.5 * v1, 1e-9 * v1);
  for (std::size_t i = 0; i < g1.samples.size(); ++i) EXPECT_NEAR(g2.samples[i], 3.5 * g1.samples[i], 1e-9);
}

TEST(CriticGradient, LocalizedToDissimilarPatches) {
  // A uniform critic sees one textured patch as the outlier; the gradient
  // vanishes on every matching patch.
  const std::vector<Image> targets{Image(32, 32, 0.5)};
  const auto c = critic_fit(targets);
  std::vector<double> px(Image::sample_count(32, 32), 0.5);
  RngStream rng(3);
  for (int y = 8; y < 16; ++y)
    for (int x = 16; x < 24; ++x)
      for (int ch = 0; ch < 3; ++ch) px[(static_cast<std::size_t>(y) * 32 + x) * 3 + ch] = rng.uniform(0.3, 0.7);
  const Image img(32, 32, std::move(px));
  const auto g = critic_input_gradient(c, img);
  double inside = 0.0, outside = 0.0;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      for (int ch = 0; ch < 3; ++ch) {
        const bool in = y >= 8 && y < 16 && x >= 16 && x < 24;
        (in ? inside : outside) = std::max(in ? inside : outside, std::abs(g(x, y, ch)));
      }
  EXPECT_GT(inside, 0.0);
  EXPECT_EQ(outside, 0.0);
}

TEST(CriticIo, RoundTripAndErrors) {
  const auto dir = std::filesystem::temp_directory_path() / "weatherfit_critic";
  std::filesystem::create_directories(dir);
  auto c = critic_fit(corpus_images(2, 18, 32), 4);
  c.scale = 2.5;
  save_critic(c, dir / "a.critic");
  const auto back = load_critic(dir / "a.critic");
  EXPECT_EQ(back.patch_size, 4);
  EXPECT_EQ(back.mean, c.mean);
  EXPECT_EQ(back.variance, c.variance);
  EXPECT_EQ(back.mean_sq, c.mean_sq);
  EXPECT_EQ(back.variance_sq, c.variance_sq);
  EXPECT_EQ(back.scale, c.scale);
  EXPECT_THROW(load_critic(dir / "missing.critic"), IoError);
  {
    std::ofstream bad(dir / "bad.critic", std::ios::binary);
    bad << "WFCRITIC\x01";
  }
  EXPECT_THROW(load_critic(dir / "bad.critic"), IoError);
}
