// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only if
// all selected criteria pass. `acceptance --only 7,8` runs a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "weatherfit/bench.hpp"
#include "weatherfit/estimate.hpp"
#include "weatherfit/guidance.hpp"

using namespace weatherfit;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Image random_image(int w, int h, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  RngStream rng(seed);
  std::vector<double> s(Image::sample_count(w, h));
  for (double& v : s) v = rng.uniform(lo, hi);
  return Image(w, h, std::move(s));
}

const std::vector<Scene>& clean() {
  static const auto scenes = bench::bench_corpus({});
  return scenes;
}

// --- recovery (1-3) ---------------------------------------------------------

const std::vector<std::uint64_t> kSeeds{1, 2, 3};

double recovery_error(const std::string& model) {
  static std::map<std::string, double> cache;
  if (auto it = cache.find(model); it != cache.end()) return it->second;
  const auto reports = bench::recovery_sweep(clean(), model, kSeeds);
  for (const auto& r : reports)
    std::printf("    %s %s*=%g seed %llu: %.4g (%.2f%%)\n", r.model.c_str(), r.parameter.c_str(), r.ground_truth,
                static_cast<unsigned long long>(r.seed), r.estimated, r.percent_error);
  return cache[model] = bench::mean_percent_error(reports);
}

Outcome recovery(const std::string& model) {
  const double err = recovery_error(model), tol = bench::recovery_tolerance(model);
  return {err <= tol, fmt("mean error %.2f%% over %zu truths x %zu seeds (tolerance %.0f%%)", err,
                          bench::default_sweep(model).size(), kSeeds.size(), tol)};
}

Outcome fog_recovery() {
  auto o = recovery("fog");
  const double fog = recovery_error("fog"), dirt = recovery_error("dirt"), rain = recovery_error("raindrop");
  const bool ordered = fog > dirt && fog > rain;
  o.pass = o.pass && ordered;
  o.detail += fmt("; fog %.2f%% > dirt %.2f%% and > raindrop %.2f%%: %s", fog, dirt, rain, ordered ? "yes" : "no");
  return o;
}

// --- landscape (4) ----------------------------------------------------------

Outcome landscape() {
  Outcome o{true, "argmin / nearest:"};
  const auto grid = bench::landscape_grid();
  for (double star : bench::landscape_truths()) {
    const auto curve = bench::raindrop_landscape(clean(), star, 1);
    const double argmin = curve.points[bench::argmin_distance(curve.points)].value;
    const double nearest = *std::min_element(grid.begin(), grid.end(), [&](double a, double b) {
      return std::abs(a - star) < std::abs(b - star);
    });
    o.pass = o.pass && argmin == nearest;
    o.detail += fmt(" sigma*=%g -> %g/%g", star, argmin, nearest);
  }
  return o;
}

// --- model choice (5) -------------------------------------------------------

Outcome model_choice() {
  const auto split = bench::split_halves(clean(), 1);
  const std::span<const Scene> sources(split.sources);
  const auto rain = bench::make_case("raindrop", 4.0);
  RngStream target_rng(5);
  const auto targets = bench::synthesize_ground_truth(std::span<const Scene>(split.targets), rain.model,
                                                      rain.w_star, target_rng);
  const auto critic = critic_fit(targets);

  constexpr std::uint64_t kRunSeed = 3;
  auto fit = [&](const AnyModel& m, ModelParams w0) {
    w0.seed = kRunSeed;
    if (m.diff_slots().empty()) {  // nothing to regress: score the fixed occluder
      RngStream rng(kRunSeed);
      return objective(m, w0, sources, critic, rng);
    }
    return estimate_differentiable(m, w0, sources, critic, default_diff_config(m.diff_slots())).loss;
  };

  Parametrized<DirtModel> dirt(DirtModel(), bench::default_dirt(0.5), {"sigma", "alpha"});
  Parametrized<FogModel> fog(FogModel(), FogParams{bench::kFogBetaInit});
  const auto& s = clean().front().image;
  Parametrized<CompositeModel> watermark(CompositeModel(), watermark_occluder(s.width(), s.height()));
  Parametrized<CompositeModel> fence(CompositeModel(), fence_occluder(s.width(), s.height(), 16, 2, 0.9));

  const double l_rain = fit(rain.model, rain.w_init);
  const std::vector<std::pair<std::string, double>> others{
      {"dirt", fit(AnyModel(dirt), dirt.initial())},
      {"fog", fit(AnyModel(fog), fog.initial())},
      {"composite-watermark", fit(AnyModel(watermark), watermark.initial())},
      {"composite-fence", fit(AnyModel(fence), fence.initial())}};
  Outcome o{true, fmt("fitted objective raindrop %.4g", l_rain)};
  for (const auto& [name, loss] : others) {
    o.pass = o.pass && l_rain < loss;
    o.detail += fmt(" < %s %.4g", name.c_str(), loss);
  }
  return o;
}

// --- population ablation (6) ------------------------------------------------

Outcome population_ablation() {
  Outcome o{true, "median final fitness:"};
  double prev = INFINITY;
  for (int lambda : {10, 25, 50}) {
    std::vector<double> fits;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      Parametrized<RaindropModel> m(RaindropModel(), bench::default_raindrops(3.0), {"sigma", "p0", "p1", "p2", "p3"});
      const auto split = bench::split_halves(clean(), seed);
      const ModelParams star = m.initial();
      RngStream target_rng(derive_seed(seed, 5));
      const auto targets =
          bench::synthesize_ground_truth(std::span<const Scene>(split.targets), m, star, target_rng);
      const auto critic = critic_fit(targets);
      ModelParams w0 = star;
      w0.differentiable[0] = 1.5;
      for (double& v : w0.non_differentiable) v = 800.0;
      w0.seed = seed;
      CmaConfig cma;
      cma.population = lambda;
      cma.max_rounds = 2;
      const auto res = estimate_joint(m, w0, std::span<const Scene>(split.sources), critic,
                                      default_diff_config(m.diff_slots()), cma, FitnessSpec{8});
      fits.push_back(res.loss);
    }
    std::nth_element(fits.begin(), fits.begin() + 2, fits.end());
    const double median = fits[2];
    o.pass = o.pass && median <= prev;
    o.detail += fmt(" lambda=%d %.5g", lambda, median);
    prev = median;
  }
  return o;
}

// --- gradients (7) ----------------------------------------------------------

double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

template <class F>
double fd_relative_error(const Image& img, std::span<const double> analytic, F&& f, double h = 1e-3) {
  std::vector<double> base(img.samples().begin(), img.samples().end()), diff(base.size()), num(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    auto plus = base, minus = base;
    plus[i] += h;
    minus[i] -= h;
    num[i] = (f(Image(img.width(), img.height(), std::move(plus))) -
              f(Image(img.width(), img.height(), std::move(minus)))) / (2.0 * h);
    diff[i] = analytic[i] - num[i];
  }
  return inf_norm(diff) / std::max(inf_norm(num), 1e-300);
}

Outcome gradients() {
  bench::CorpusOptions opt;
  opt.width = opt.height = 32;
  const auto critic = critic_fit(images_of(bench::make_corpus(4, 15, opt)), 8);
  double worst = 0.0, worst_set = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto img = random_image(16, 16, 100 + seed, 0.05, 0.95);
    const auto g = critic_input_gradient(critic, img);
    worst = std::max(worst, fd_relative_error(img, g.samples, [&](const Image& x) { return critic_score(critic, x).value; }));
    const std::vector<Image> batch{img, random_image(16, 16, 300 + seed, 0.05, 0.95)};
    const auto gs = critic_set_gradient(critic, batch);
    worst_set = std::max(worst_set, fd_relative_error(img, gs[0].samples, [&](const Image& x) {
                           return critic.loss(std::vector<Image>{x, batch[1]});
                         }));
  }

  // f = sum a_i (w_i - c_i)^2 + w0 w1
  const std::vector<double> a{1.5, 0.3, 4.0}, c{0.2, -1.0, 3.0}, w{0.7, 0.4, -2.0};
  auto f = [&](std::span<const double> x) {
    double s = x[0] * x[1];
    for (std::size_t i = 0; i < 3; ++i) s += a[i] * (x[i] - c[i]) * (x[i] - c[i]);
    return s;
  };
  const auto pg = param_gradient(f, w, std::vector<FdStep>(3, FdStep{1e-3, 0.0}),
                                 std::vector<Bounds>(3, Bounds{-10.0, 10.0}));
  const std::vector<double> exact{2 * a[0] * (w[0] - c[0]) + w[1], 2 * a[1] * (w[1] - c[1]) + w[0],
                                  2 * a[2] * (w[2] - c[2])};
  double quad = 0.0;
  for (std::size_t i = 0; i < 3; ++i) quad = std::max(quad, std::abs(pg.gradient[i] - exact[i]));

  return {worst <= 1e-3 && worst_set <= 1e-3 && quad <= 1e-6,
          fmt("critic input gradient rel. error %.2e (set form %.2e, tolerance 1e-3); "
              "quadratic param gradient abs. error %.2e (tolerance 1e-6)",
              worst, worst_set, quad)};
}

// --- CMA-ES (8) -------------------------------------------------------------

Outcome cma_sphere() {
  Outcome o{true, "best fitness after 200 generations:"};
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    RngStream rng(seed);
    std::vector<double> x0(5);
    for (double& v : x0) v = rng.uniform(-3.0, 3.0);
    const auto s = cma_es_minimize([](const Eigen::VectorXd& x) { return x.squaredNorm(); },
                                   cma_es_init(x0, 1.0, 10), rng, 200);
    o.pass = o.pass && s.best_fitness < 1e-6;
    o.detail += fmt(" %.1e", s.best_fitness);
  }
  return o;
}

// --- renderer invariants (9) ------------------------------------------------

struct Checks {
  std::vector<std::string> failed;
  int run = 0;
  void operator()(bool ok, const std::string& what) {
    ++run;
    if (!ok) failed.push_back(what);
  }
};

RaindropParams drops(double sigma) { return bench::default_raindrops(sigma); }

void compose_checks(Checks& check) {
  RngStream rng(17);
  bool affine = true;
  for (int trial = 0; trial < 20; ++trial) {
    const auto scene = random_image(9, 7, rng.next_u64());
    Overlay o{random_image(9, 7, rng.next_u64()), AlphaMap(9, 7)};
    for (double& a : o.alpha.data()) a = rng.uniform();
    const auto out = compose(scene, o);
    for (int y = 0; y < 7; ++y)
      for (int x = 0; x < 9; ++x)
        for (int c = 0; c < 3; ++c) {
          const double s = scene(x, y, c), w = o.color(x, y, c), al = o.alpha(x, y);
          affine &= std::abs(out(x, y, c) - (s + al * (w - s))) <= 1e-12;
          affine &= out(x, y, c) >= std::min(s, w) - 1e-12 && out(x, y, c) <= std::max(s, w) + 1e-12;
        }
  }
  check(affine, "compose affine");
  const Image scene(4, 4, 0.3);
  check(compose(scene, Overlay{Image(4, 4, 0.9), AlphaMap(4, 4, 0.0)}) == scene, "compose alpha 0");
  check(compose(scene, Overlay{Image(4, 4, 0.9), AlphaMap(4, 4, 1.0)}) == Image(4, 4, 0.9), "compose alpha 1");
}

void fog_checks(Checks& check) {
  bool identity = true, airlight = true;
  int sky = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& s = clean()[i];
    identity &= compose(s.image, render_fog(s.image, *s.depth, FogParams{0.0})) == s.image;
    const FogParams p{0.02};
    const auto out = compose(s.image, render_fog(s.image, *s.depth, p));
    for (int y = 0; y < s.image.height(); ++y)
      for (int x = 0; x < s.image.width(); ++x)
        if (std::isinf((*s.depth)(x, y))) {
          ++sky;
          for (int c = 0; c < 3; ++c) airlight &= out(x, y, c) == p.atmospheric_light[static_cast<std::size_t>(c)];
        }
  }
  check(identity, "fog beta=0 identity");
  check(airlight && sky > 0, "fog d=inf airlight");
}

void dirt_checks(Checks& check) {
  RngStream rng(21);
  bool ceiling = true;
  for (int trial = 0; trial < 20; ++trial) {
    DirtParams p;
    p.alpha = rng.uniform();
    p.sigma = rng.uniform(0.0, 6.0);
    p.blob_frequency = rng.uniform(0.0, 2000.0);
    p.blob_size = rng.uniform(3.0, 20.0);
    RngStream r(static_cast<std::uint64_t>(trial));
    const auto o = render_dirt(random_image(64, 64, static_cast<std::uint64_t>(trial)), p, r);
    for (double a : o.alpha.data()) ceiling &= a >= 0.0 && a <= p.alpha + 1e-15;
  }
  check(ceiling, "dirt opacity ceiling");
}

void raindrop_checks(Checks& check) {
  // Single drop over a ramp: R encodes x, G encodes y, so each covered pixel
  // reveals the coordinate it refracts.
  const auto field = load_displacement(std::filesystem::path(WEATHERFIT_DATA_DIR) / "udisp.pgm",
                                       std::filesystem::path(WEATHERFIT_DATA_DIR) / "vdisp.pgm");
  const int w = 96, h = 80;
  Image ramp(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      ramp.set(x, y, 0, static_cast<double>(x) / (w - 1));
      ramp.set(x, y, 1, static_cast<double>(y) / (h - 1));
      ramp.set(x, y, 2, 0.5);
    }
  Blob drop;
  drop.cx = 40.3;
  drop.cy = 35.7;
  drop.size = 9.0;
  drop.shape = 0.2;
  drop.thickness = 0.8;
  const auto o = rasterize_drops(ramp, std::span(&drop, 1), field).resolve(0.0);
  const double bound = drop.size * (1.0 + drop.shape + 0.1);
  const int n = field.u.width();
  bool displaced = true;
  int covered = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!drop.contains(x, y)) {
        displaced &= o.alpha(x, y) == 0.0;
        continue;
      }
      ++covered;
      const int ix = static_cast<int>(std::lround(((x - drop.cx) / bound + 1.0) * 0.5 * (n - 1)));
      const int iy = static_cast<int>(std::lround(((y - drop.cy) / bound + 1.0) * 0.5 * (n - 1)));
      const double su = std::clamp(drop.cx + field.u(ix, iy) * drop.thickness, 0.0, w - 1.0);
      const double sv = std::clamp(drop.cy + field.v(ix, iy) * drop.thickness, 0.0, h - 1.0);
      displaced &= std::abs(o.color(x, y, 0) - su / (w - 1)) <= 1e-12;
      displaced &= std::abs(o.color(x, y, 1) - sv / (h - 1)) <= 1e-12;
      displaced &= o.alpha(x, y) == 1.0;
    }
  check(displaced && covered > 50, "raindrop single-pixel displacement");

  // Mean drop count over 100 seeds within 3 standard errors of the Poisson rate.
  const auto kinds = drop_kinds(drops(0.0));
  const int cw = 256, chh = 192;
  bool poisson = true;
  for (const auto& kind : kinds) {
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      RngStream rng(seed);
      total += static_cast<double>(place_blobs(cw, chh, std::span(&kind, 1), 0.6, 1.0, rng).size());
    }
    const double lambda = kind.frequency * cw * chh / 1e6;
    poisson &= std::abs(total / 100.0 - lambda) <= 3.0 * std::sqrt(lambda / 100.0);
  }
  check(poisson, "raindrop Poisson drop count");
}

void determinism_checks(Checks& check) {
  const auto& s = clean()[3];
  const auto dirt = bench::default_dirt(0.6);
  auto render_all = [&](std::uint64_t seed) {
    std::vector<Overlay> out;
    RngStream a(seed), b(seed), c(seed);
    out.push_back(render_raindrops(s.image, drops(2.0), default_displacement(), a));
    out.push_back(render_dirt(s.image, dirt, b));
    out.push_back(render_composite(s.image, watermark_occluder(64, 64), c));
    out.push_back(render_fog(s.image, *s.depth, FogParams{10.0}));
    return out;
  };
  const auto x = render_all(42), y = render_all(42), z = render_all(43);
  bool same = true, differs = false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    same &= x[i].color == y[i].color && x[i].alpha == y[i].alpha;
    if (i < 2) differs |= !(x[i].alpha == z[i].alpha);
  }
  check(same, "bit-exact repeat renders");
  check(differs, "renders vary with seed");
}

Outcome renderer_invariants() {
  const auto t0 = std::chrono::steady_clock::now();
  Checks check;
  compose_checks(check);
  fog_checks(check);
  dirt_checks(check);
  raindrop_checks(check);
  determinism_checks(check);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  check(secs <= 120.0, "runtime within 2 min");
  Outcome o{check.failed.empty(), fmt("%d checks in %.1fs", check.run, secs)};
  for (const auto& f : check.failed) o.detail += "; failed: " + f;
  return o;
}

// --- guidance invariants (10) -----------------------------------------------

Outcome guidance_invariants() {
  // Targets: mild grey texture. Sources: the same texture with a dark,
  // high-contrast bottom half.
  constexpr int n = 64;
  RngStream rng(17);
  auto texture = [&] {
    std::vector<double> s(Image::sample_count(n, n));
    for (double& v : s) v = rng.uniform(0.45, 0.55);
    return s;
  };
  std::vector<Image> targets, sources;
  for (int i = 0; i < 6; ++i) targets.emplace_back(n, n, texture());
  for (int i = 0; i < 6; ++i) {
    auto s = texture();
    for (std::size_t k = s.size() / 2; k < s.size(); ++k) s[k] = rng.uniform(0.0, 0.35);
    sources.emplace_back(n, n, std::move(s));
  }
  const auto dg = compute_guidance(critic_fit(targets, 8), sources);

  const auto [lo, hi] = std::minmax_element(dg.data().begin(), dg.data().end());
  const bool bounded = *lo >= 0.0 && *hi <= 1.0;

  const auto empty = injection_mask(dg, 0.0);
  const bool none = std::all_of(empty.data().begin(), empty.data().end(), [](auto m) { return m == 0; });

  bool monotone = true;
  BinaryMask prev = empty;
  for (int k = 1; k <= 20; ++k) {
    const auto m = injection_mask(dg, k / 20.0);
    for (std::size_t i = 0; i < m.size(); ++i) monotone &= prev.data()[i] <= m.data()[i];
    prev = m;
  }

  double top = 0.0, bottom = 0.0;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) (y < n / 2 ? top : bottom) += dg(x, y);
  top /= n * n / 2;
  bottom /= n * n / 2;

  return {bounded && none && monotone && bottom > top,
          fmt("DG range [%.3g, %.3g]; gamma=0 mask empty: %s; masks monotone over 21 gammas: %s; "
              "mean DG shifted half %.3f vs unshifted %.3f",
              *lo, *hi, none ? "yes" : "no", monotone ? "yes" : "no", bottom, top)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("weatherfit acceptance criteria");
  std::vector<int> only;
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',')->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"raindrop sigma recovery", [] { return recovery("raindrop"); }},
      {"dirt alpha recovery", [] { return recovery("dirt"); }},
      {"fog beta recovery", fog_recovery},
      {"landscape minimum", landscape},
      {"model-choice ablation", model_choice},
      {"population-size ablation", population_ablation},
      {"gradient correctness", gradients},
      {"CMA-ES sphere", cma_sphere},
      {"renderer invariants", renderer_invariants},
      {"guidance invariants", guidance_invariants},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2d %s  %s: %s [%.1fs]\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
