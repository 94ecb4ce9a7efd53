#pragma once

#include <optional>
#include <span>
#include <vector>

#include "weatherfit/estimate/cma.hpp"
#include "weatherfit/estimate/descent.hpp"

namespace weatherfit {

struct CmaConfig {
  int population = 10;
  double sigma0 = 0.3;  // initial step, in units of each bound range
  int generations_per_round = 5;
  int gradient_steps_per_round = 20;
  int max_rounds = 8;
  double round_tol = 1e-3;  // relative improvement that counts as progress
  std::optional<std::vector<double>> warm_start;  // initial mean; default w_init
};

struct FitnessSpec {
  std::size_t n_samples = 8;  // images averaged per fitness evaluation
};

struct JointEstimate {
  ModelParams w;
  double loss = 0.0;  // objective of w on all sources under the run seeds
  double initial_loss = 0.0;
  int rounds = 0;
  Trace trace;
};

// Alternates gradient steps on the differentiable block and CMA-ES
// generations on the non-differentiable block, each with the other frozen,
// until neither improves the loss for two consecutive rounds. Both blocks
// are scored on the full source set with the run's fixed seeds; CMA-ES
// fitness uses n_samples sources drawn per generation.
template <EstimableModel M>
JointEstimate estimate_joint(const M& model, const ModelParams& w_init, std::span<const Scene> sources,
                             const Critic& critic, const DiffEstimateConfig& config, const CmaConfig& cma_cfg,
                             const FitnessSpec& fitness) {
  if (fitness.n_samples < 1) throw InvalidArgument("FitnessSpec: n_samples must be at least 1");
  if (w_init.non_differentiable.empty()) {
    auto d = estimate_differentiable(model, w_init, sources, critic, config);
    return {std::move(d.w), d.loss, d.initial_loss, 1, std::move(d.trace)};
  }
  if (sources.empty()) throw InvalidArgument("estimate_joint: empty source list");
  const auto nd_bounds = model.nondiff_bounds();
  detail::check_within(w_init.non_differentiable, nd_bounds, "non-differentiable");
  const bool has_diff = !w_init.differentiable.empty();
  const auto cfg = config.resolved(model.diff_bounds());
  if (has_diff) detail::check_within(w_init.differentiable, cfg.bounds, "differentiable");

  RngStream rng(w_init.seed);
  const auto seeds = draw_seeds(rng, sources.size());
  RngStream cma_rng(derive_seed(w_init.seed, 0xc3a0000ULL));
  auto full_loss = [&](const ModelParams& w) { return objective(model, w, sources, critic, seeds); };

  // CMA-ES runs on the unit box.
  const std::size_t nd = nd_bounds.size();
  auto to_unit = [&](std::span<const double> x) {
    std::vector<double> u(nd);
    for (std::size_t i = 0; i < nd; ++i) u[i] = (x[i] - nd_bounds[i].lo) / (nd_bounds[i].hi - nd_bounds[i].lo);
    return u;
  };
  auto from_unit = [&](const Eigen::VectorXd& u) {
    std::vector<double> x(nd);
    for (std::size_t i = 0; i < nd; ++i)
      x[i] = nd_bounds[i].clamp(nd_bounds[i].lo + u[static_cast<Eigen::Index>(i)] * (nd_bounds[i].hi - nd_bounds[i].lo));
    return x;
  };
  const auto start = cma_cfg.warm_start.value_or(w_init.non_differentiable);
  detail::check_within(start, nd_bounds, "warm start");
  CmaState cma = cma_es_init(to_unit(start), cma_cfg.sigma0, cma_cfg.population);
  const std::vector<double> zeros(nd, 0.0), ones(nd, 1.0);
  cma_es_set_bounds(cma, zeros, ones);

  JointEstimate out;
  out.w = w_init;
  out.loss = full_loss(w_init);
  out.initial_loss = out.loss;
  DescentState descent;
  int stalled = 0;

  for (int round = 0; round < cma_cfg.max_rounds && stalled < 2; ++round) {
    out.rounds = round + 1;
    bool improved = false;

    if (has_diff) {
      const double before = out.loss;
      auto f = detail::diff_block_loss(model, out.w, sources, critic, seeds, cfg.batch_size);
      auto r = minimize_descent(f, out.w.differentiable, cfg, descent, cma_cfg.gradient_steps_per_round, round,
                                out.w.non_differentiable);
      out.trace.insert(out.trace.end(), r.trace.begin(), r.trace.end());
      ModelParams cand = out.w;
      cand.differentiable = r.w;
      const double loss = cfg.batch_size == 0 || cfg.batch_size >= sources.size() ? r.loss : full_loss(cand);
      if (loss < out.loss) {
        out.loss = loss;
        out.w = std::move(cand);
      }
      improved |= before - out.loss > cma_cfg.round_tol * std::abs(before);
    }

    const double before = out.loss;
    std::vector<double> block_best_x;
    double block_best = std::numeric_limits<double>::infinity();
    for (int gen = 0; gen < cma_cfg.generations_per_round; ++gen) {
      // Same sample and seeds for every candidate of a generation.
      const auto idx = detail::step_batch(sources.size(), fitness.n_samples, cma_rng.next_u64(), gen);
      std::vector<Scene> sub;
      for (auto i : idx) sub.push_back(sources[i]);
      const auto sub_seeds = draw_seeds(cma_rng, sub.size());
      const auto pop = cma_es_ask(cma, cma_rng);
      std::vector<double> fit(pop.size());
      for (std::size_t k = 0; k < pop.size(); ++k) {
        ModelParams cand = out.w;
        cand.non_differentiable = from_unit(pop[k]);
        fit[k] = objective(model, cand, std::span<const Scene>(sub), critic, std::span<const std::uint64_t>(sub_seeds));
        if (!std::isfinite(fit[k])) throw NonFiniteLoss("non-finite fitness in generation " + std::to_string(gen), out.trace);
      }
      cma = cma_es_tell(std::move(cma), pop, fit);
      const auto best = static_cast<std::size_t>(std::min_element(fit.begin(), fit.end()) - fit.begin());
      TraceRow row{round, "nd", gen, fit[best], out.w.differentiable};
      const auto x = from_unit(pop[best]);
      row.params.insert(row.params.end(), x.begin(), x.end());
      out.trace.push_back(std::move(row));
      if (fit[best] < block_best) {
        block_best = fit[best];
        block_best_x = x;
      }
    }
    // The noisy per-generation winner and the distribution mean compete on
    // the full set.
    for (const auto& x : {block_best_x, from_unit(cma.mean)}) {
      ModelParams cand = out.w;
      cand.non_differentiable = x;
      const double loss = full_loss(cand);
      if (loss < out.loss) {
        out.loss = loss;
        out.w = std::move(cand);
      }
    }
    improved |= before - out.loss > cma_cfg.round_tol * std::abs(before);
    stalled = improved ? 0 : stalled + 1;
  }
  return out;
}

}  // namespace weatherfit
