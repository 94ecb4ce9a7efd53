#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "weatherfit/critic.hpp"
#include "weatherfit/error.hpp"
#include "weatherfit/model.hpp"
#include "weatherfit/parallel.hpp"
#include "weatherfit/rng.hpp"

namespace weatherfit {

// One render seed per source image. Reusing a list across evaluations gives
// common random numbers: differences then measure parameter effects only.
inline std::vector<std::uint64_t> draw_seeds(RngStream& rng, std::size_t n) {
  std::vector<std::uint64_t> seeds(n);
  for (auto& s : seeds) s = rng.next_u64();
  return seeds;
}

namespace detail {
inline void check_within(std::span<const double> v, std::span<const Bounds> b, const char* block) {
  if (v.size() != b.size()) throw InvalidArgument(std::string(block) + ": parameter count mismatch");
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i]) || !b[i].contains(v[i]))
      throw InvalidArgument(std::string(block) + " parameter " + std::to_string(i) + " = " +
                            std::to_string(v[i]) + " outside [" + std::to_string(b[i].lo) + ", " +
                            std::to_string(b[i].hi) + "]");
}
}  // namespace detail

// Renders sources[i] with w under seeds[i], composes, and scores the batch
// with the critic's set loss.
template <EstimableModel M>
double objective(const M& model, const ModelParams& w, std::span<const Scene> sources, const Critic& critic,
                 std::span<const std::uint64_t> seeds) {
  if (sources.empty()) throw InvalidArgument("objective: empty source list");
  if (seeds.size() != sources.size()) throw InvalidArgument("objective: one seed per source required");
  detail::check_within(w.differentiable, model.diff_bounds(), "differentiable");
  detail::check_within(w.non_differentiable, model.nondiff_bounds(), "non-differentiable");
  std::vector<Image> out(sources.size());
  parallel_for(sources.size(), [&](std::size_t i) {
    RngStream rng(seeds[i]);
    out[i] = compose(sources[i].image, model.render(sources[i], w, rng));
  });
  return critic.loss(out);
}

template <EstimableModel M>
double objective(const M& model, const ModelParams& w, std::span<const Scene> sources, const Critic& critic,
                 RngStream& rng) {
  const auto seeds = draw_seeds(rng, sources.size());
  return objective(model, w, sources, critic, std::span<const std::uint64_t>(seeds));
}

// Finite-difference step: max(absolute, relative * |w|).
struct FdStep {
  double absolute = 1e-3;
  double relative = 0.0;

  double at(double w) const noexcept { return std::max(absolute, relative * std::abs(w)); }
};

struct GradientResult {
  std::vector<double> gradient;
  std::vector<bool> one_sided;  // true where a bound forced a one-sided difference
};

// Central differences of f at w; components whose +/- probe would leave the
// bounds fall back to a one-sided difference against f(w) (`f_at_w`, computed
// on demand if NaN).
template <class F>
GradientResult param_gradient(F&& f, std::span<const double> w, std::span<const FdStep> steps,
                              std::span<const Bounds> bounds, double f_at_w = NAN) {
  const std::size_t n = w.size();
  if (steps.size() != n || bounds.size() != n) throw InvalidArgument("param_gradient: size mismatch");
  GradientResult r{std::vector<double>(n, 0.0), std::vector<bool>(n, false)};
  std::vector<double> probe(w.begin(), w.end());
  auto eval_at = [&](std::size_t i, double v) {
    probe[i] = v;
    const double y = f(std::span<const double>(probe));
    probe[i] = w[i];
    return y;
  };
  for (std::size_t i = 0; i < n; ++i) {
    const double h = steps[i].at(w[i]);
    if (!(h > 0.0)) throw InvalidArgument("param_gradient: finite-difference step must be positive");
    const double up = w[i] + h, down = w[i] - h;
    if (up <= bounds[i].hi && down >= bounds[i].lo) {
      r.gradient[i] = (eval_at(i, up) - eval_at(i, down)) / (2.0 * h);
      continue;
    }
    r.one_sided[i] = true;
    if (std::isnan(f_at_w)) f_at_w = f(w);
    const double a = std::min(up, bounds[i].hi), b = std::max(down, bounds[i].lo);
    // Prefer the side that still has room; the wider side otherwise.
    if (a - w[i] >= w[i] - b)
      r.gradient[i] = a > w[i] ? (eval_at(i, a) - f_at_w) / (a - w[i]) : 0.0;
    else
      r.gradient[i] = (f_at_w - eval_at(i, b)) / (w[i] - b);
  }
  return r;
}

// Gradient of the objective with respect to the differentiable block, every
// probe sharing `seeds`.
template <EstimableModel M>
GradientResult param_gradient(const M& model, const ModelParams& w, std::span<const Scene> sources,
                              const Critic& critic, std::span<const FdStep> steps,
                              std::span<const std::uint64_t> seeds) {
  const auto bounds = model.diff_bounds();
  auto f = [&](std::span<const double> wd) {
    ModelParams p = w;
    p.differentiable.assign(wd.begin(), wd.end());
    return objective(model, p, sources, critic, seeds);
  };
  return param_gradient(f, w.differentiable, steps, bounds);
}

}  // namespace weatherfit
