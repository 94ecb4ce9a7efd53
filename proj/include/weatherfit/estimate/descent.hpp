#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <span>
#include <string>
#include <vector>

#include "weatherfit/estimate/objective.hpp"

namespace weatherfit {

// One optimizer step. `params` holds the differentiable block followed by the
// non-differentiable block.
struct TraceRow {
  int round = 0;
  std::string block;  // "d" gradient step, "nd" evolution generation
  int iter = 0;
  double loss = 0.0;
  std::vector<double> params;
};
using Trace = std::vector<TraceRow>;

// Thrown when the objective turns non-finite; carries the trace so far.
class NonFiniteLoss : public NumericError {
 public:
  NonFiniteLoss(const std::string& what, Trace trace) : NumericError(what), trace_(std::move(trace)) {}
  const Trace& trace() const noexcept { return trace_; }

 private:
  Trace trace_;
};

inline void write_trace_csv(const Trace& trace, std::span<const std::string> names,
                            const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << "round,block,iter,loss";
  for (const auto& n : names) out << ',' << n;
  out << '\n' << std::setprecision(9);
  for (const auto& r : trace) {
    out << r.round << ',' << r.block << ',' << r.iter << ',' << r.loss;
    for (double p : r.params) out << ',' << p;
    out << '\n';
  }
  if (!out) throw IoError(path.string() + ": write failed");
}

struct DiffEstimateConfig {
  std::vector<double> learning_rate;  // initial per-parameter step; empty = 5% of each bound range
  int max_iters = 40;
  std::size_t batch_size = 0;  // 0 = all sources every step
  std::vector<FdStep> fd_step;  // per parameter; empty = 1e-3 of each bound range
  double tol = 1e-3;            // stop once every step size < tol * (hi - lo)
  std::vector<Bounds> bounds;   // empty = the model's bounds

  // Step-size adaptation: grow while the gradient sign holds, shrink on a flip.
  double grow = 1.2;
  double shrink = 0.5;

  // Resolves empty per-parameter fields against `model_bounds` and checks
  // the invariants.
  DiffEstimateConfig resolved(std::span<const Bounds> model_bounds) const {
    DiffEstimateConfig c = *this;
    const std::size_t n = model_bounds.size();
    if (c.bounds.empty()) c.bounds.assign(model_bounds.begin(), model_bounds.end());
    if (c.bounds.size() != n) throw InvalidArgument("DiffEstimateConfig: bounds size mismatch");
    for (const auto& b : c.bounds)
      if (!(b.lo < b.hi)) throw InvalidArgument("DiffEstimateConfig: bounds need lo < hi");
    if (c.learning_rate.empty())
      for (const auto& b : c.bounds) c.learning_rate.push_back(0.05 * (b.hi - b.lo));
    if (c.fd_step.empty())
      for (const auto& b : c.bounds) c.fd_step.push_back({1e-3 * (b.hi - b.lo), 0.0});
    if (c.learning_rate.size() != n || c.fd_step.size() != n)
      throw InvalidArgument("DiffEstimateConfig: per-parameter size mismatch");
    for (double lr : c.learning_rate)
      if (!(lr > 0.0)) throw InvalidArgument("DiffEstimateConfig: learning_rate must be positive");
    for (const auto& s : c.fd_step)
      if (!(s.absolute > 0.0) || s.relative < 0.0) throw InvalidArgument("DiffEstimateConfig: fd_step must be positive");
    if (c.max_iters < 0) throw InvalidArgument("DiffEstimateConfig: max_iters must be non-negative");
    if (!(c.grow >= 1.0) || !(c.shrink > 0.0 && c.shrink < 1.0))
      throw InvalidArgument("DiffEstimateConfig: need grow >= 1 and 0 < shrink < 1");
    return c;
  }
};

// Step defaults for the named physical parameters: sigma 0.05 px, alpha
// 0.005, beta 0.5% of its current value.
inline FdStep default_fd_step(const ParamSlot& slot) {
  if (slot.name == "sigma") return {0.05, 0.0};
  if (slot.name == "alpha") return {0.005, 0.0};
  if (slot.name == "beta") return {1e-3, 0.005};
  return {1e-3 * (slot.bounds.hi - slot.bounds.lo), 0.0};
}

inline DiffEstimateConfig default_diff_config(std::span<const ParamSlot> slots) {
  DiffEstimateConfig c;
  for (const auto& s : slots) c.fd_step.push_back(default_fd_step(s));
  return c;
}

struct DescentResult {
  std::vector<double> w;  // best iterate
  double loss = 0.0;      // its loss
  double initial_loss = 0.0;
  int iterations = 0;
  bool one_sided = false;  // some gradient used a one-sided difference
  Trace trace;
};

struct DescentState {
  std::vector<double> step;       // current per-parameter step size
  std::vector<double> last_sign;  // sign of the previous nonzero gradient
};

// Projected sign-gradient descent (Rprop) over a box. Each parameter moves
// by its own step size against the gradient sign; the step grows by `grow`
// while the sign holds and shrinks by `shrink` on a flip, so the method is
// insensitive to the loss scale. `batch_loss(w, iteration)` is the loss used
// for the gradient and the trace; with a fixed sample it is a deterministic
// function of w. The best iterate (including the start) is returned.
template <class F>
DescentResult minimize_descent(F&& batch_loss, std::vector<double> w, const DiffEstimateConfig& cfg,
                               DescentState& state, int max_iters, int round = 0,
                               std::span<const double> suffix = {}) {
  const std::size_t n = w.size();
  if (state.step.size() != n) state = {cfg.learning_rate, std::vector<double>(n, 0.0)};
  detail::check_within(w, cfg.bounds, "descent start");

  DescentResult r;
  auto record = [&](int iter, double loss) {
    TraceRow row{round, "d", iter, loss, w};
    row.params.insert(row.params.end(), suffix.begin(), suffix.end());
    r.trace.push_back(std::move(row));
    if (!std::isfinite(loss))
      throw NonFiniteLoss("non-finite objective at iteration " + std::to_string(iter), r.trace);
  };

  for (int it = 0;; ++it) {
    auto f = [&](std::span<const double> x) { return batch_loss(x, it); };
    const double loss = f(w);
    record(it, loss);
    if (it == 0) {
      r.initial_loss = loss;
      r.loss = loss;
      r.w = w;
    } else if (loss < r.loss) {
      r.loss = loss;
      r.w = w;
    }
    if (it >= max_iters) break;

    const auto g = param_gradient(f, w, cfg.fd_step, cfg.bounds, loss);
    for (bool b : g.one_sided) r.one_sided |= b;
    for (double gi : g.gradient)
      if (!std::isfinite(gi)) throw NonFiniteLoss("non-finite gradient at iteration " + std::to_string(it), r.trace);

    bool active = false;
    for (std::size_t i = 0; i < n; ++i) {
      const double range = cfg.bounds[i].hi - cfg.bounds[i].lo;
      const double sign = g.gradient[i] > 0.0 ? 1.0 : (g.gradient[i] < 0.0 ? -1.0 : 0.0);
      if (sign * state.last_sign[i] > 0.0) state.step[i] = std::min(state.step[i] * cfg.grow, range);
      else if (sign * state.last_sign[i] < 0.0) state.step[i] *= cfg.shrink;
      if (sign != 0.0) state.last_sign[i] = sign;
      const double next = cfg.bounds[i].clamp(w[i] - sign * state.step[i]);
      // Pinned against a bound by the gradient counts as settled.
      const bool pinned = next == w[i];
      active |= !pinned && sign != 0.0 && state.step[i] >= cfg.tol * range;
      w[i] = next;
    }
    r.iterations = it + 1;
    if (!active) {
      const double last = f(w);
      record(it + 1, last);
      if (last < r.loss) {
        r.loss = last;
        r.w = w;
      }
      break;
    }
  }
  return r;
}

namespace detail {

// Batch selection for one step: all sources, or batch_size of them drawn
// without replacement from a per-step stream.
inline std::vector<std::size_t> step_batch(std::size_t n, std::size_t batch, std::uint64_t seed, int step) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  if (batch == 0 || batch >= n) return idx;
  RngStream rng(derive_seed(seed, 0xba7c4000ULL + static_cast<std::uint64_t>(step)));
  for (std::size_t i = 0; i < batch; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  idx.resize(batch);
  return idx;
}

template <EstimableModel M>
auto diff_block_loss(const M& model, const ModelParams& base, std::span<const Scene> sources, const Critic& critic,
                     std::span<const std::uint64_t> seeds, std::size_t batch_size) {
  return [&model, base, sources, &critic, seeds, batch_size](std::span<const double> wd, int step) {
    ModelParams p = base;
    p.differentiable.assign(wd.begin(), wd.end());
    if (batch_size == 0 || batch_size >= sources.size()) return objective(model, p, sources, critic, seeds);
    const auto idx = step_batch(sources.size(), batch_size, base.seed, step);
    std::vector<Scene> sub;
    std::vector<std::uint64_t> sub_seeds;
    for (auto i : idx) {
      sub.push_back(sources[i]);
      sub_seeds.push_back(seeds[i]);
    }
    return objective(model, p, std::span<const Scene>(sub), critic, std::span<const std::uint64_t>(sub_seeds));
  };
}

}  // namespace detail

struct DiffEstimate {
  ModelParams w;  // best iterate; the non-differentiable block is unchanged
  double loss = 0.0;
  double initial_loss = 0.0;
  bool one_sided = false;
  Trace trace;
};

// Regresses the differentiable block with the non-differentiable block
// frozen. Render seeds are drawn once from w_init.seed, so every evaluation
// shares them.
template <EstimableModel M>
DiffEstimate estimate_differentiable(const M& model, const ModelParams& w_init, std::span<const Scene> sources,
                                     const Critic& critic, const DiffEstimateConfig& config) {
  if (sources.empty()) throw InvalidArgument("estimate_differentiable: empty source list");
  const auto cfg = config.resolved(model.diff_bounds());
  detail::check_within(w_init.non_differentiable, model.nondiff_bounds(), "non-differentiable");
  RngStream rng(w_init.seed);
  const auto seeds = draw_seeds(rng, sources.size());
  auto f = detail::diff_block_loss(model, w_init, sources, critic, seeds, cfg.batch_size);
  DescentState state;
  auto r = minimize_descent(f, w_init.differentiable, cfg, state, cfg.max_iters, 0, w_init.non_differentiable);
  DiffEstimate out{w_init, r.loss, r.initial_loss, r.one_sided, std::move(r.trace)};
  out.w.differentiable = std::move(r.w);
  return out;
}

}  // namespace weatherfit
