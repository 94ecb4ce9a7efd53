#pragma once

// Option table of the weatherfit command line, shared with its tests.
// A config file (--config) holds `key = value` lines; keys under a
// `[render]`, `[fit]`, `[guidance]` or `[bench]` header set that
// subcommand's options. Command-line flags win over file values and
// unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"

namespace weatherfit::cli {

struct RunConfig {
  std::string command;

  // shared
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0 = all cores
  std::filesystem::path out = ".";

  // model
  std::string model;
  std::map<std::string, double> params;  // only the values that were given
  std::string occluder = "watermark";    // composite: watermark | fence
  double opacity = -1.0;                 // composite; < 0 = occluder default
  std::filesystem::path udisp, vdisp;    // raindrop refraction field; empty = shipped field

  // inputs
  std::filesystem::path sources, targets, depth, critic;
  double meters_per_unit = 1.0;

  // estimation
  bool only_differentiable = false;
  std::vector<std::string> free;  // empty = every parameter of the model
  int population = 10;
  int max_iters = 40;
  int rounds = 8;
  int n_samples = 8;
  int patch = 8;

  // guidance
  double gamma = 0.75;

  // bench
  std::vector<std::string> models{"raindrop", "dirt", "fog"};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::uint64_t corpus_seed = 1;  // bench: --seed picks the clean corpus
  std::size_t scenes = 64;
  int size = 128;
  bool landscape = true;
};

// Names accepted as model parameter flags, e.g. --sigma or --p2.
inline const std::vector<std::string>& parameter_flags() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n{"sigma", "alpha", "beta", "blob_frequency", "blob_size"};
    for (char k = '0'; k <= '3'; ++k)
      for (const char* p : {"t", "s", "p"}) n.push_back(p + std::string(1, k));
    return n;
  }();
  return names;
}

namespace detail {

// Long option with both spellings so config keys may use '_' or '-'.
inline std::string long_name(const std::string& key) {
  std::string dashed = key;
  for (char& c : dashed)
    if (c == '_') c = '-';
  return dashed == key ? "--" + key : "--" + dashed + ",--" + key;
}

inline void add_shared(CLI::App* sub, RunConfig& c, std::uint64_t& seed,
                       const std::string& seed_help = "Run seed; every random stream derives from it") {
  sub->add_option("--seed", seed, seed_help)->capture_default_str();
  sub->add_option("--out", c.out, "Output directory")->capture_default_str();
  sub->add_option("--threads", c.threads, "Worker threads (0 = all cores)")->capture_default_str();
  sub->allow_config_extras(CLI::config_extras_mode::error);
}

inline void add_model(CLI::App* sub, RunConfig& c, bool required) {
  auto* m = sub->add_option("--model", c.model, "raindrop | dirt | fog | composite")
                ->check(CLI::IsMember({"raindrop", "dirt", "fog", "composite"}));
  if (required) m->required();
  for (const auto& name : parameter_flags())
    sub->add_option_function<double>(long_name(name), [&c, name](double v) { c.params[name] = v; },
                                     "Model parameter " + name);
  sub->add_option("--occluder", c.occluder, "Composite occluder: watermark | fence")
      ->check(CLI::IsMember({"watermark", "fence"}))
      ->capture_default_str();
  sub->add_option("--opacity", c.opacity, "Composite occluder opacity")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--udisp", c.udisp, "Raindrop U displacement PGM");
  sub->add_option("--vdisp", c.vdisp, "Raindrop V displacement PGM");
}

inline void add_depth(CLI::App* sub, RunConfig& c) {
  sub->add_option("--depth", c.depth, "Directory of 16-bit depth PGMs named like the sources");
  sub->add_option(long_name("meters_per_unit"), c.meters_per_unit, "Depth units per PGM code")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

}  // namespace detail

// Builds the subcommands on `app`; parsed values land in `c`.
inline void add_options(CLI::App& app, RunConfig& c) {
  app.set_config("--config", "", "Read options from a key = value file");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);
  app.fallthrough();

  auto* render = app.add_subcommand("render", "Render a model over source images");
  detail::add_shared(render, c, c.seed);
  detail::add_model(render, c, true);
  detail::add_depth(render, c);
  render->add_option("--sources", c.sources, "Directory of source PNGs")->required();

  auto* fit = app.add_subcommand("fit", "Estimate model parameters from sources to targets");
  detail::add_shared(fit, c, c.seed);
  detail::add_model(fit, c, true);
  detail::add_depth(fit, c);
  fit->add_option("--sources", c.sources, "Directory of source PNGs")->required();
  fit->add_option("--targets", c.targets, "Directory of target PNGs")->required();
  fit->add_flag(detail::long_name("only_differentiable"), c.only_differentiable,
                "Estimate only the differentiable parameters");
  fit->add_option("--free", c.free, "Parameters to estimate (default: all)")->delimiter(',');
  fit->add_option("--population", c.population, "CMA-ES population size")->check(CLI::Range(2, 1000))
      ->capture_default_str();
  fit->add_option(detail::long_name("max_iters"), c.max_iters, "Gradient steps (differentiable-only fit)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  fit->add_option("--rounds", c.rounds, "Maximum alternation rounds")->check(CLI::PositiveNumber)
      ->capture_default_str();
  fit->add_option(detail::long_name("n_samples"), c.n_samples, "Images per CMA-ES fitness evaluation")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  fit->add_option("--patch", c.patch, "Critic patch size")->check(CLI::Range(3, 256))->capture_default_str();

  auto* guidance = app.add_subcommand("guidance", "Compute the guidance map and injection mask");
  detail::add_shared(guidance, c, c.seed);
  guidance->add_option("--sources", c.sources, "Directory of source PNGs")->required();
  auto* targets = guidance->add_option("--targets", c.targets, "Directory of target PNGs to fit the critic on");
  auto* critic = guidance->add_option("--critic", c.critic, "Fitted .critic file");
  targets->excludes(critic);
  guidance->add_option("--gamma", c.gamma, "Injection threshold in [0,1]")->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  guidance->add_option("--patch", c.patch, "Critic patch size when fitting")->check(CLI::Range(3, 256))
      ->capture_default_str();

  auto* bench = app.add_subcommand("bench", "Parameter recovery and landscape benchmark");
  detail::add_shared(bench, c, c.corpus_seed, "Clean corpus seed");
  bench->add_option("--models", c.models, "Models to run")
      ->delimiter(',')
      ->check(CLI::IsMember({"raindrop", "dirt", "fog"}))
      ->capture_default_str();
  bench->add_option("--seeds", c.seeds, "Protocol seeds")->delimiter(',')->capture_default_str();
  bench->add_option("--scenes", c.scenes, "Clean corpus size")->check(CLI::Range(2, 100000))
      ->capture_default_str();
  bench->add_option("--size", c.size, "Corpus image size")->check(CLI::Range(16, 4096))->capture_default_str();
  bench->add_flag("--landscape,!--no-landscape", c.landscape, "Sweep the raindrop sigma landscape");

  for (auto* sub : {render, fit, guidance, bench})
    sub->final_callback([&c, sub] { c.command = sub->get_name(); });
}

}  // namespace weatherfit::cli
