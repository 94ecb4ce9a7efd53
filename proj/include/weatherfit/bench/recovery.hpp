#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "weatherfit/critic.hpp"
#include "weatherfit/estimate.hpp"
#include "weatherfit/model.hpp"

namespace weatherfit::bench {

struct RecoveryReport {
  std::string model;
  std::string parameter;
  double ground_truth = 0.0;
  double estimated = 0.0;
  double percent_error = 0.0;
  std::uint64_t seed = 0;
  double seconds = 0.0;
};

inline double percent_error(double estimated, double truth) {
  if (truth == 0.0) throw InvalidArgument("percent error undefined for a zero ground truth");
  return 100.0 * std::abs(estimated - truth) / std::abs(truth);
}

// Renders and composes every clean scene with w_star, one fresh seed each.
template <EstimableModel M>
std::vector<Image> synthesize_ground_truth(std::span<const Scene> clean, const M& model, const ModelParams& w_star,
                                           RngStream& rng) {
  if (clean.empty()) throw InvalidArgument("synthesize_ground_truth: empty clean set");
  const auto seeds = draw_seeds(rng, clean.size());
  std::vector<Image> out(clean.size());
  parallel_for(clean.size(), [&](std::size_t i) {
    RngStream r(seeds[i]);
    out[i] = compose(clean[i].image, model.render(clean[i], w_star, r));
  });
  return out;
}

// Seeded split of the clean corpus into disjoint source and target halves.
struct Split {
  std::vector<Scene> sources;
  std::vector<Scene> targets;
};

inline Split split_halves(std::span<const Scene> clean, std::uint64_t seed) {
  if (clean.size() < 2) throw InvalidArgument("split_halves: need at least two scenes");
  std::vector<std::size_t> idx(clean.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  RngStream rng(derive_seed(seed, 0x5b117ULL));
  for (std::size_t i = 0; i + 1 < idx.size(); ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
  Split s;
  for (std::size_t i = 0; i < idx.size(); ++i) (i < idx.size() / 2 ? s.sources : s.targets).push_back(clean[idx[i]]);
  return s;
}

struct EstimatorConfig {
  DiffEstimateConfig diff;
  CmaConfig cma;
  FitnessSpec fitness;
  int critic_patch = 8;
};

// Stream ids for the per-seed sub-seeds of one recovery run.
inline constexpr std::uint64_t kTargetStream = 0x7a26e7ULL;
inline constexpr std::uint64_t kEstimateStream = 0xe57ULL;

struct RecoveryRun {
  std::vector<RecoveryReport> reports;  // one per free parameter
  JointEstimate estimate;
  Critic critic;
};

// One seed of the protocol: split, synthesize targets with w_star, fit the
// critic on them, estimate from w_init, and report every free parameter.
template <EstimableModel M>
RecoveryRun run_recovery_once(std::span<const Scene> clean, const M& model, std::span<const ParamSlot> diff_slots,
                              std::span<const ParamSlot> nondiff_slots, const ModelParams& w_star,
                              const ModelParams& w_init, const EstimatorConfig& cfg, std::uint64_t seed,
                              std::string_view model_name) {
  const auto start = std::chrono::steady_clock::now();
  const auto split = split_halves(clean, seed);
  RngStream target_rng(derive_seed(seed, kTargetStream));
  const auto targets = synthesize_ground_truth(std::span<const Scene>(split.targets), model, w_star, target_rng);
  RecoveryRun run;
  run.critic = critic_fit(targets, cfg.critic_patch);
  ModelParams init = w_init;
  init.seed = derive_seed(seed, kEstimateStream);
  run.estimate = estimate_joint(model, init, std::span<const Scene>(split.sources), run.critic, cfg.diff, cfg.cma,
                                cfg.fitness);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  auto report = [&](const ParamSlot& slot, double truth, double est) {
    run.reports.push_back(
        {std::string(model_name), slot.name, truth, est, percent_error(est, truth), seed, secs});
  };
  for (std::size_t i = 0; i < diff_slots.size(); ++i)
    report(diff_slots[i], w_star.differentiable[i], run.estimate.w.differentiable[i]);
  for (std::size_t i = 0; i < nondiff_slots.size(); ++i)
    report(nondiff_slots[i], w_star.non_differentiable[i], run.estimate.w.non_differentiable[i]);
  return run;
}

// The recovery protocol over a seed list; reports in seed order.
template <EstimableModel M>
  requires requires(const M& m) {
    m.diff_slots();
    m.nondiff_slots();
    m.name();
  }
std::vector<RecoveryReport> run_recovery(std::span<const Scene> clean, const M& model, const ModelParams& w_star,
                                         const ModelParams& w_init, const EstimatorConfig& cfg,
                                         std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw InvalidArgument("run_recovery: at least one seed required");
  std::vector<RecoveryReport> out;
  for (auto seed : seeds) {
    auto run = run_recovery_once(clean, model, model.diff_slots(), model.nondiff_slots(), w_star, w_init, cfg, seed,
                                 model.name());
    out.insert(out.end(), run.reports.begin(), run.reports.end());
  }
  return out;
}

inline double mean_percent_error(std::span<const RecoveryReport> reports) {
  if (reports.empty()) return NAN;
  double s = 0.0;
  for (const auto& r : reports) s += r.percent_error;
  return s / static_cast<double>(reports.size());
}

}  // namespace weatherfit::bench
