#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "weatherfit/model.hpp"

namespace weatherfit::bench {

// Drop population used for every raindrop ground truth: many small drops,
// a few large ones.
inline RaindropParams default_raindrops(double sigma = 0.0) {
  RaindropParams p;
  p.sigma = sigma;
  p.drop_types = {DropType{0.1, 3.0, 2000.0}, DropType{0.2, 5.0, 1200.0}, DropType{0.3, 8.0, 500.0},
                  DropType{0.1, 12.0, 150.0}};
  return p;
}

// Many small soiling blobs covering roughly a fifth of the frame.
inline DirtParams default_dirt(double alpha = 0.5) {
  DirtParams p;
  p.sigma = 2.0;
  p.blob_frequency = 1000.0;
  p.blob_size = 8.0;
  p.alpha = alpha;
  return p;
}

// A single-parameter recovery case: the model with only `parameter` free,
// its ground truth, and the estimator's starting point.
struct RecoveryCase {
  AnyModel model;
  std::string parameter;
  ModelParams w_star;
  ModelParams w_init;
};

inline constexpr double kRaindropSigmaInit = 3.0;
inline constexpr double kDirtAlphaInit = 0.5;
inline constexpr double kFogBetaInit = 15.0;

inline const std::vector<double>& default_sweep(std::string_view model) {
  static const std::vector<double> rain{1.0, 2.0, 4.0, 8.0};
  static const std::vector<double> dirt{0.2, 0.4, 0.6, 0.8};
  static const std::vector<double> fog{5.0, 10.0, 20.0, 40.0};  // per km
  if (model == "raindrop") return rain;
  if (model == "dirt") return dirt;
  if (model == "fog") return fog;
  throw InvalidArgument("no recovery sweep for model '" + std::string(model) + "'");
}

inline RecoveryCase make_case(std::string_view model, double truth) {
  auto build = [&](auto m, auto params, std::string name, double init) {
    using M = decltype(m);
    Parametrized<M> p(std::move(m), params, {name});
    ModelParams star = p.initial();
    star.differentiable[0] = truth;
    ModelParams w0 = star;
    w0.differentiable[0] = init;
    return RecoveryCase{AnyModel(std::move(p)), std::move(name), std::move(star), std::move(w0)};
  };
  if (model == "raindrop") return build(RaindropModel(), default_raindrops(), "sigma", kRaindropSigmaInit);
  if (model == "dirt") return build(DirtModel(), default_dirt(), "alpha", kDirtAlphaInit);
  if (model == "fog") return build(FogModel(), FogParams{}, "beta", kFogBetaInit);
  throw InvalidArgument("no recovery case for model '" + std::string(model) + "'");
}

}  // namespace weatherfit::bench
