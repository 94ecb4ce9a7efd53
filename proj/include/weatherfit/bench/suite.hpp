#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "weatherfit/bench/cases.hpp"
#include "weatherfit/bench/corpus.hpp"
#include "weatherfit/bench/landscape.hpp"
#include "weatherfit/bench/recovery.hpp"

namespace weatherfit::bench {

// The standard bench: 64 clean 128x128 scenes from corpus seed 1.
struct BenchOptions {
  std::size_t scenes = 64;
  std::uint64_t corpus_seed = 1;
  CorpusOptions corpus;
};

inline std::vector<Scene> bench_corpus(const BenchOptions& opt) {
  return make_corpus(opt.scenes, opt.corpus_seed, opt.corpus);
}

// Mean percent error allowed per model.
inline double recovery_tolerance(std::string_view model) {
  if (model == "raindrop" || model == "dirt") return 10.0;
  if (model == "fog") return 30.0;
  throw InvalidArgument("no recovery tolerance for model '" + std::string(model) + "'");
}

// Every ground truth of the model's sweep, every seed; reports in sweep order.
inline std::vector<RecoveryReport> recovery_sweep(std::span<const Scene> clean, std::string_view model,
                                                  std::span<const std::uint64_t> seeds,
                                                  const std::vector<double>& truths) {
  std::vector<RecoveryReport> out;
  for (double truth : truths) {
    const auto c = make_case(model, truth);
    EstimatorConfig cfg;
    cfg.diff = default_diff_config(c.model.diff_slots());
    auto r = run_recovery(clean, c.model, c.w_star, c.w_init, cfg, seeds);
    out.insert(out.end(), r.begin(), r.end());
  }
  return out;
}

inline std::vector<RecoveryReport> recovery_sweep(std::span<const Scene> clean, std::string_view model,
                                                  std::span<const std::uint64_t> seeds) {
  return recovery_sweep(clean, model, seeds, default_sweep(model));
}

// Raindrop blur ground truths for the landscape check. Above about 4.5 px
// the curve flattens at 128x128 and its minimum drifts up one grid step on
// some splits.
inline const std::vector<double>& landscape_truths() {
  static const std::vector<double> v{1.2, 2.3, 3.81};
  return v;
}

inline std::vector<double> landscape_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 10; ++i) g.push_back(i);
  return g;
}

// Feature distance between raindrop targets at sigma_star (built on one half
// of a seeded split) and the other half rendered over the grid.
inline LandscapeCurve raindrop_landscape(std::span<const Scene> clean, double sigma_star, std::uint64_t seed) {
  const auto split = split_halves(clean, seed);
  const auto c = make_case("raindrop", sigma_star);
  RngStream rng(derive_seed(seed, kTargetStream));
  const auto targets = synthesize_ground_truth(std::span<const Scene>(split.targets), c.model, c.w_star, rng);
  const auto grid = landscape_grid();
  return {"raindrop", "sigma", sigma_star,
          sweep_landscape(std::span<const Scene>(split.sources), targets, c.model, "sigma", grid,
                          derive_seed(seed, kEstimateStream))};
}

}  // namespace weatherfit::bench
