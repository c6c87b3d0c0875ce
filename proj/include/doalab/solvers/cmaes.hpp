#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "doalab/simulate.hpp"

namespace doalab {

/// Box-constrained CMA-ES with the standard self-adaptive hyperparameters as
/// functions of the dimension. The search runs in box-normalized coordinates
/// so widely different parameter scales coexist; coordinates flagged in
/// integer_mask are rounded to the nearest integer (in original units) before
/// evaluation and keep at least one grid step of sampling spread so they
/// never freeze (mixed-parameter operation).
struct CmaesConfig {
  int dimension = 0;
  int population_size = 0;  // 0 -> 4 + floor(3 ln n)
  int generations = 500;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  std::vector<bool> integer_mask;  // empty = all continuous
  int restarts = 0;
  std::uint64_t seed = 1;
  double initial_step_fraction = 0.3;  // of the normalized box
  double target_value = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd initial_mean;        // empty = box center (restarts randomize)
};

struct CmaesResult {
  Eigen::VectorXd best_point;  // as evaluated (clipped, rounded)
  double best_value = std::numeric_limits<double>::infinity();
  std::vector<double> history;  // best value per generation
  long evaluations = 0;
};

inline CmaesResult cmaes_minimize(const std::function<double(const Eigen::VectorXd&)>& objective,
                                  const CmaesConfig& config) {
  const int n = config.dimension;
  if (n < 1) throw std::invalid_argument("cmaes: dimension must be >= 1");
  if (config.lower.size() != n || config.upper.size() != n)
    throw std::invalid_argument("cmaes: bounds must match dimension");
  for (int i = 0; i < n; ++i)
    if (!(config.lower(i) < config.upper(i)))
      throw std::invalid_argument("cmaes: need lower < upper per coordinate");
  const int lambda = config.population_size > 0
                         ? config.population_size
                         : 4 + static_cast<int>(std::floor(3.0 * std::log(n)));
  if (lambda < 4) throw std::invalid_argument("cmaes: population_size must be >= 4");

  const int mu = lambda / 2;
  Eigen::VectorXd weights(mu);
  for (int i = 0; i < mu; ++i) weights(i) = std::log(mu + 0.5) - std::log(i + 1.0);
  weights /= weights.sum();
  const double mueff = 1.0 / weights.squaredNorm();

  const double cs = (mueff + 2.0) / (n + mueff + 5.0);
  const double ds = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff - 1.0) / (n + 1.0)) - 1.0) + cs;
  const double cc = (4.0 + mueff / n) / (n + 4.0 + 2.0 * mueff / n);
  const double c1 = 2.0 / ((n + 1.3) * (n + 1.3) + mueff);
  const double cmu =
      std::min(1.0 - c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((n + 2.0) * (n + 2.0) + mueff));
  const double chi_n = std::sqrt(double(n)) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

  // the strategy operates on u in [0, 1]^n
  const Eigen::VectorXd scale = config.upper - config.lower;
  auto to_x = [&](const Eigen::VectorXd& u) {
    Eigen::VectorXd x = config.lower + u.cwiseProduct(scale);
    for (int i = 0; i < n; ++i) {
      x(i) = std::clamp(x(i), config.lower(i), config.upper(i));
      if (!config.integer_mask.empty() && config.integer_mask[i])
        x(i) = std::clamp(std::round(x(i)), std::ceil(config.lower(i)),
                          std::floor(config.upper(i)));
    }
    return x;
  };
  auto to_u = [&](const Eigen::VectorXd& x) {
    return ((x - config.lower).cwiseQuotient(scale)).cwiseMax(0.0).cwiseMin(1.0).eval();
  };

  Rng rng(config.seed);
  CmaesResult result;

  for (int run = 0; run <= config.restarts; ++run) {
    Eigen::VectorXd mean(n);
    if (run == 0 && config.initial_mean.size() == n) {
      mean = to_u(config.initial_mean);
    } else if (run == 0) {
      mean = Eigen::VectorXd::Constant(n, 0.5);
    } else {
      for (int i = 0; i < n; ++i) mean(i) = rng.uniform();
    }
    double sigma = config.initial_step_fraction;
    Eigen::MatrixXd C = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd ps = Eigen::VectorXd::Zero(n), pc = Eigen::VectorXd::Zero(n);

    std::vector<Eigen::VectorXd> us(lambda);
    std::vector<std::pair<double, int>> ranked(lambda);

    for (int gen = 0; gen < config.generations; ++gen) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
      Eigen::VectorXd diag = es.eigenvalues().cwiseMax(1e-20).cwiseSqrt();
      const Eigen::MatrixXd& B = es.eigenvectors();
      const Eigen::MatrixXd BD = B * diag.asDiagonal();
      const Eigen::MatrixXd invsqrtC = B * diag.cwiseInverse().asDiagonal() * B.transpose();

      for (int i = 0; i < lambda; ++i) {
        Eigen::VectorXd z(n);
        for (int k = 0; k < n; ++k) z(k) = rng.normal();
        Eigen::VectorXd u = mean + sigma * (BD * z);
        if (!config.integer_mask.empty()) {
          // one grid step in normalized units is 1/scale
          for (int k = 0; k < n; ++k) {
            if (!config.integer_mask[k]) continue;
            const double step = 1.0 / scale(k);
            const double s_k = sigma * std::sqrt(std::max(C(k, k), 0.0));
            if (s_k < step) u(k) += rng.normal() * std::sqrt(step * step - s_k * s_k);
          }
        }
        const Eigen::VectorXd x = to_x(u);
        us[i] = to_u(x);  // quantized, in-box sample used for the update
        const double f = objective(x);
        ++result.evaluations;
        ranked[i] = {f, i};
        if (f < result.best_value) {
          result.best_value = f;
          result.best_point = x;
        }
      }
      std::sort(ranked.begin(), ranked.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      result.history.push_back(result.best_value);
      if (result.best_value <= config.target_value) return result;

      const Eigen::VectorXd old_mean = mean;
      Eigen::VectorXd new_mean = Eigen::VectorXd::Zero(n);
      for (int i = 0; i < mu; ++i) new_mean += weights(i) * us[ranked[i].second];
      const Eigen::VectorXd y_w = (new_mean - old_mean) / sigma;
      mean = new_mean;

      ps = (1.0 - cs) * ps + std::sqrt(cs * (2.0 - cs) * mueff) * (invsqrtC * y_w);
      const double ps_norm = ps.norm();
      const bool hsig = ps_norm / std::sqrt(1.0 - std::pow(1.0 - cs, 2.0 * (gen + 1))) / chi_n <
                        1.4 + 2.0 / (n + 1.0);
      pc = (1.0 - cc) * pc + (hsig ? std::sqrt(cc * (2.0 - cc) * mueff) : 0.0) * y_w;

      Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(n, n);
      for (int i = 0; i < mu; ++i) {
        const Eigen::VectorXd y = (us[ranked[i].second] - old_mean) / sigma;
        rank_mu += weights(i) * y * y.transpose();
      }
      const double delta_hsig = (1.0 - (hsig ? 1.0 : 0.0)) * cc * (2.0 - cc);
      C = (1.0 - c1 - cmu) * C + c1 * (pc * pc.transpose() + delta_hsig * C) + cmu * rank_mu;
      C = 0.5 * (C + C.transpose());

      sigma *= std::exp((cs / ds) * (ps_norm / chi_n - 1.0));
      sigma = std::min(sigma, 5.0);
      if (sigma < 1e-16) break;
    }
  }
  return result;
}

}  // namespace doalab
