#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "weatherfit/error.hpp"
#include "weatherfit/rng.hpp"

namespace weatherfit {

// (mu/mu_w, lambda)-CMA-ES with rank-one and rank-mu covariance updates and
// cumulative step-size adaptation, default strategy parameters.
struct CmaState {
  Eigen::VectorXd mean;
  double sigma = 0.3;
  Eigen::MatrixXd covariance;
  Eigen::VectorXd p_c;
  Eigen::VectorXd p_sigma;
  int generation = 0;
  int lambda = 10;

  // Box constraints; infinite by default.
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  // Strategy constants.
  int mu = 5;
  Eigen::VectorXd weights;
  double mu_eff = 0.0;
  double c_c = 0.0, c_sigma = 0.0, c_1 = 0.0, c_mu = 0.0, damps = 0.0, chi_n = 0.0;

  // Eigendecomposition C = B diag(D^2) B^T, refreshed after every tell.
  Eigen::MatrixXd B;
  Eigen::VectorXd D;
  int covariance_resets = 0;

  Eigen::VectorXd best_x;
  double best_fitness = std::numeric_limits<double>::infinity();

  int dim() const noexcept { return static_cast<int>(mean.size()); }
};

namespace detail {

inline void cma_decompose(CmaState& s) {
  s.covariance = 0.5 * (s.covariance + s.covariance.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s.covariance);
  if (eig.info() != Eigen::Success || !eig.eigenvalues().allFinite() || eig.eigenvalues().minCoeff() <= 0.0) {
    std::clog << "cma-es: covariance decomposition failed at generation " << s.generation
              << "; resetting to identity\n";
    ++s.covariance_resets;
    s.covariance = Eigen::MatrixXd::Identity(s.dim(), s.dim());
    s.B = s.covariance;
    s.D = Eigen::VectorXd::Ones(s.dim());
    s.p_c.setZero();
    return;
  }
  s.B = eig.eigenvectors();
  s.D = eig.eigenvalues().cwiseSqrt();
}

}  // namespace detail

inline CmaState cma_es_init(std::span<const double> mean, double sigma, int lambda = 10) {
  if (mean.empty()) throw InvalidArgument("cma-es: empty search space");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidArgument("cma-es: sigma must be positive");
  if (lambda < 2) throw InvalidArgument("cma-es: population size must be at least 2");
  const int n = static_cast<int>(mean.size());
  CmaState s;
  s.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), n);
  s.sigma = sigma;
  s.lambda = lambda;
  s.covariance = Eigen::MatrixXd::Identity(n, n);
  s.B = s.covariance;
  s.D = Eigen::VectorXd::Ones(n);
  s.p_c = Eigen::VectorXd::Zero(n);
  s.p_sigma = Eigen::VectorXd::Zero(n);
  s.lo = Eigen::VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
  s.hi = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());

  s.mu = lambda / 2;
  s.weights.resize(s.mu);
  for (int i = 0; i < s.mu; ++i) s.weights[i] = std::log(s.mu + 0.5) - std::log(i + 1.0);
  s.weights /= s.weights.sum();
  s.mu_eff = 1.0 / s.weights.squaredNorm();
  const double dn = n;
  s.c_c = (4.0 + s.mu_eff / dn) / (dn + 4.0 + 2.0 * s.mu_eff / dn);
  s.c_sigma = (s.mu_eff + 2.0) / (dn + s.mu_eff + 5.0);
  s.c_1 = 2.0 / ((dn + 1.3) * (dn + 1.3) + s.mu_eff);
  s.c_mu = std::min(1.0 - s.c_1, 2.0 * (s.mu_eff - 2.0 + 1.0 / s.mu_eff) / ((dn + 2.0) * (dn + 2.0) + s.mu_eff));
  s.damps = 1.0 + 2.0 * std::max(0.0, std::sqrt((s.mu_eff - 1.0) / (dn + 1.0)) - 1.0) + s.c_sigma;
  s.chi_n = std::sqrt(dn) * (1.0 - 1.0 / (4.0 * dn) + 1.0 / (21.0 * dn * dn));
  return s;
}

inline void cma_es_set_bounds(CmaState& s, std::span<const double> lo, std::span<const double> hi) {
  if (lo.size() != static_cast<std::size_t>(s.dim()) || hi.size() != lo.size())
    throw InvalidArgument("cma-es: bounds size mismatch");
  s.lo = Eigen::Map<const Eigen::VectorXd>(lo.data(), s.dim());
  s.hi = Eigen::Map<const Eigen::VectorXd>(hi.data(), s.dim());
  if ((s.lo.array() >= s.hi.array()).any()) throw InvalidArgument("cma-es: bounds need lo < hi");
}

// Samples lambda candidates from N(mean, sigma^2 C). Out-of-box candidates
// are redrawn up to 100 times, then clamped.
inline std::vector<Eigen::VectorXd> cma_es_ask(const CmaState& s, RngStream& rng) {
  const int n = s.dim();
  std::vector<Eigen::VectorXd> pop(static_cast<std::size_t>(s.lambda));
  Eigen::VectorXd z(n);
  for (auto& x : pop) {
    for (int attempt = 0;; ++attempt) {
      for (int i = 0; i < n; ++i) z[i] = rng.normal();
      x = s.mean + s.sigma * (s.B * s.D.cwiseProduct(z));
      const bool inside = (x.array() >= s.lo.array()).all() && (x.array() <= s.hi.array()).all();
      if (inside) break;
      if (attempt + 1 >= 100) {
        x = x.cwiseMax(s.lo).cwiseMin(s.hi);
        break;
      }
    }
  }
  return pop;
}

inline CmaState cma_es_tell(CmaState s, const std::vector<Eigen::VectorXd>& pop, std::span<const double> fitness) {
  if (pop.size() != static_cast<std::size_t>(s.lambda) || fitness.size() != pop.size())
    throw InvalidArgument("cma-es: population and fitness sizes must equal lambda");
  for (double f : fitness)
    if (!std::isfinite(f)) throw NumericError("cma-es: non-finite fitness");
  const int n = s.dim();
  const double dn = n;

  std::vector<std::size_t> order(pop.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return fitness[a] < fitness[b]; });
  if (fitness[order[0]] < s.best_fitness) {
    s.best_fitness = fitness[order[0]];
    s.best_x = pop[order[0]];
  }

  const Eigen::VectorXd old_mean = s.mean;
  Eigen::MatrixXd steps(n, s.mu);
  s.mean.setZero();
  for (int i = 0; i < s.mu; ++i) {
    s.mean += s.weights[i] * pop[order[static_cast<std::size_t>(i)]];
    steps.col(i) = (pop[order[static_cast<std::size_t>(i)]] - old_mean) / s.sigma;
  }
  const Eigen::VectorXd shift = (s.mean - old_mean) / s.sigma;

  // C^{-1/2} shift = B D^{-1} B^T shift
  const Eigen::VectorXd whitened = s.B * (s.B.transpose() * shift).cwiseQuotient(s.D);
  s.p_sigma = (1.0 - s.c_sigma) * s.p_sigma + std::sqrt(s.c_sigma * (2.0 - s.c_sigma) * s.mu_eff) * whitened;
  ++s.generation;
  const double ps_norm = s.p_sigma.norm();
  const bool h_sigma = ps_norm / std::sqrt(1.0 - std::pow(1.0 - s.c_sigma, 2.0 * s.generation)) / s.chi_n <
                       1.4 + 2.0 / (dn + 1.0);
  s.p_c = (1.0 - s.c_c) * s.p_c + (h_sigma ? std::sqrt(s.c_c * (2.0 - s.c_c) * s.mu_eff) : 0.0) * shift;

  const double delta_h = h_sigma ? 0.0 : s.c_c * (2.0 - s.c_c);
  s.covariance = (1.0 - s.c_1 - s.c_mu) * s.covariance + s.c_1 * (s.p_c * s.p_c.transpose() + delta_h * s.covariance) +
                 s.c_mu * steps * s.weights.asDiagonal() * steps.transpose();
  s.sigma *= std::exp((s.c_sigma / s.damps) * (ps_norm / s.chi_n - 1.0));
  if (!std::isfinite(s.sigma) || s.sigma <= 0.0) throw NumericError("cma-es: step size degenerated");
  detail::cma_decompose(s);
  return s;
}

// Plain minimization loop, one fitness call per candidate in index order.
template <class F>
CmaState cma_es_minimize(F&& f, CmaState s, RngStream& rng, int generations) {
  std::vector<double> fit(static_cast<std::size_t>(s.lambda));
  for (int g = 0; g < generations; ++g) {
    const auto pop = cma_es_ask(s, rng);
    for (std::size_t i = 0; i < pop.size(); ++i) fit[i] = f(pop[i]);
    s = cma_es_tell(std::move(s), pop, fit);
  }
  return s;
}

}  // namespace weatherfit
