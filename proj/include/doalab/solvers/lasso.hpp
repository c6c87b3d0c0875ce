#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "doalab/simulate.hpp"

namespace doalab {

/// min (1/2)||z - A p - N w||^2 + lambda ||p||_1 with p >= 0 and optional
/// noise columns N carrying unpenalized nonnegative coordinates w. Solved by
/// cyclic coordinate descent with exact single-coordinate updates.
struct LassoProblem {
  MatrixC dictionary;   // m x K
  VectorC observation;  // m
  double lambda = 0.0;
  bool nonneg = true;   // false: complex coefficients, modulus penalty
};

struct LassoResult {
  Eigen::VectorXd solution;        // K (nonneg path)
  VectorC solution_complex;        // K (only when nonneg = false)
  double noise_power = 0.0;        // sum of the noise coefficients
  Eigen::VectorXd noise_powers;    // one per supplied noise column
  VectorC residual;
  double objective = 0.0;          // (1/2)||r||^2 + lambda ||p||_1
  bool converged = true;
  int sweeps = 0;
  std::vector<double> objective_history;  // objective after each sweep
};

struct LassoOptions {
  double tol = 1e-8;       // max coordinate change per sweep
  int max_sweeps = 10000;
};

inline LassoResult nonneg_lasso(const LassoProblem& prob, const MatrixC* noise_columns = nullptr,
                                const LassoOptions& opt = {}) {
  const Eigen::Index m = prob.dictionary.rows();
  const Eigen::Index K = prob.dictionary.cols();
  if (prob.observation.size() != m) throw std::invalid_argument("nonneg_lasso: size mismatch");
  if (prob.lambda < 0.0) throw std::invalid_argument("nonneg_lasso: lambda must be >= 0");
  if (noise_columns && noise_columns->rows() != m)
    throw std::invalid_argument("nonneg_lasso: noise column size mismatch");
  const Eigen::Index n_noise = noise_columns ? noise_columns->cols() : 0;

  Eigen::VectorXd col_norm2(K);
  for (Eigen::Index k = 0; k < K; ++k) col_norm2(k) = prob.dictionary.col(k).squaredNorm();
  Eigen::VectorXd noise_norm2(n_noise);
  for (Eigen::Index j = 0; j < n_noise; ++j) noise_norm2(j) = noise_columns->col(j).squaredNorm();

  LassoResult res;
  res.solution = Eigen::VectorXd::Zero(K);
  res.noise_powers = Eigen::VectorXd::Zero(n_noise);
  VectorC sol_c = VectorC::Zero(K);
  VectorC r = prob.observation;

  res.converged = false;
  int sweeps = 0;
  while (sweeps < opt.max_sweeps) {
    ++sweeps;
    double max_change = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) {
      if (col_norm2(k) < 1e-300) continue;
      if (prob.nonneg) {
        const double old_v = res.solution(k);
        const double raw = (prob.dictionary.col(k).dot(r)).real() + col_norm2(k) * old_v;
        const double v = std::max(0.0, (raw - prob.lambda) / col_norm2(k));
        if (v != old_v) {
          r -= prob.dictionary.col(k) * (v - old_v);
          res.solution(k) = v;
          max_change = std::max(max_change, std::abs(v - old_v));
        }
      } else {
        const cd old_v = sol_c(k);
        const cd raw = prob.dictionary.col(k).dot(r) + col_norm2(k) * old_v;
        const double mag = std::abs(raw);
        const cd v = mag <= prob.lambda ? cd(0, 0)
                                        : raw * ((mag - prob.lambda) / (mag * col_norm2(k)));
        if (v != old_v) {
          r -= prob.dictionary.col(k) * (v - old_v);
          sol_c(k) = v;
          max_change = std::max(max_change, std::abs(v - old_v));
        }
      }
    }
    for (Eigen::Index j = 0; j < n_noise; ++j) {
      if (noise_norm2(j) < 1e-300) continue;
      const double old_w = res.noise_powers(j);
      const double raw = noise_columns->col(j).dot(r).real() + noise_norm2(j) * old_w;
      const double w = std::max(0.0, raw / noise_norm2(j));
      if (w != old_w) {
        r -= noise_columns->col(j) * (w - old_w);
        res.noise_powers(j) = w;
        max_change = std::max(max_change, std::abs(w - old_w));
      }
    }
    {
      const double pen = prob.nonneg ? res.solution.sum() : sol_c.cwiseAbs().sum();
      res.objective_history.push_back(0.5 * r.squaredNorm() + prob.lambda * pen);
    }
    if (max_change < opt.tol) {
      res.converged = true;
      break;
    }
  }

  res.solution_complex = sol_c;
  res.noise_power = res.noise_powers.size() ? res.noise_powers.sum() : 0.0;
  res.residual = r;
  const double pen = prob.nonneg ? res.solution.sum() : sol_c.cwiseAbs().sum();
  res.objective = 0.5 * r.squaredNorm() + prob.lambda * pen;
  res.sweeps = sweeps;
  return res;
}

inline LassoResult nonneg_lasso(const LassoProblem& prob, const VectorC& noise_column,
                                const LassoOptions& opt = {}) {
  const MatrixC cols = noise_column;
  return nonneg_lasso(prob, &cols, opt);
}

/// Largest stationarity violation over the returned solution: active
/// coordinates need a vanishing derivative, inactive ones a nonnegative one.
inline double lasso_kkt_residual(const LassoProblem& prob, const LassoResult& res,
                                 const VectorC* noise_column = nullptr) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < prob.dictionary.cols(); ++k) {
    const double g = -(prob.dictionary.col(k).dot(res.residual)).real() + prob.lambda;
    if (res.solution(k) > 0.0)
      worst = std::max(worst, std::abs(g));
    else
      worst = std::max(worst, std::max(0.0, -g));
  }
  if (noise_column) {
    const double g = -(noise_column->dot(res.residual)).real();
    if (res.noise_power > 0.0)
      worst = std::max(worst, std::abs(g));
    else
      worst = std::max(worst, std::max(0.0, -g));
  }
  return worst;
}

/// One measurement block per frequency for the group-sparse model.
struct GroupLassoBlock {
  MatrixC dictionary;    // m_q x K, same K across blocks
  VectorC observation;   // m_q
  VectorC noise_column;  // optional (empty = none), unpenalized nonnegative
};

struct GroupLassoResult {
  Eigen::MatrixXd solutions;  // K x Q, nonneg
  std::vector<double> noise_powers;
  double objective = 0.0;     // (1/2)||r||^2 + beta sum_k ||group_k||
  bool converged = true;
  int sweeps = 0;
};

namespace detail {

/// argmin over g >= 0 of (1/2) sum d_q g_q^2 - sum c_q g_q + penalty ||g||_2.
/// Active coordinates are exactly those with c_q > 0; on them
/// g_q = c_q t / (d_q t + penalty) where t = ||g|| solves a monotone scalar
/// fixed point (bisection).
inline void group_prox(const Eigen::VectorXd& d, const Eigen::VectorXd& c, double penalty,
                       Eigen::VectorXd& g) {
  const Eigen::Index Q = d.size();
  g.setZero(Q);
  double cpos_norm2 = 0.0;
  for (Eigen::Index q = 0; q < Q; ++q)
    if (c(q) > 0.0) cpos_norm2 += c(q) * c(q);
  if (cpos_norm2 <= penalty * penalty) return;

  double t_hi = 0.0;
  for (Eigen::Index q = 0; q < Q; ++q)
    if (c(q) > 0.0 && d(q) > 0.0) t_hi += (c(q) / d(q)) * (c(q) / d(q));
  t_hi = std::sqrt(t_hi) + 1e-30;
  double t_lo = 0.0;
  auto phi = [&](double t) {
    double s = 0.0;
    for (Eigen::Index q = 0; q < Q; ++q)
      if (c(q) > 0.0) {
        const double gq = c(q) * t / (d(q) * t + penalty);
        s += gq * gq;
      }
    return std::sqrt(s) - t;
  };
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (t_lo + t_hi);
    if (phi(mid) > 0.0)
      t_lo = mid;
    else
      t_hi = mid;
  }
  const double t = 0.5 * (t_lo + t_hi);
  for (Eigen::Index q = 0; q < Q; ++q)
    if (c(q) > 0.0) g(q) = c(q) * t / (d(q) * t + penalty);
}

}  // namespace detail

/// min (1/2)||z - C p||^2 + beta sum_k ||(p_1[k], ..., p_Q[k])||_2 with
/// nonnegative unknowns over a block-diagonal dictionary, by block
/// coordinate descent with exact group updates.
inline GroupLassoResult group_lasso(const std::vector<GroupLassoBlock>& blocks, double beta,
                                    const LassoOptions& opt = {}) {
  if (blocks.empty()) throw std::invalid_argument("group_lasso: no blocks");
  const Eigen::Index Q = static_cast<Eigen::Index>(blocks.size());
  const Eigen::Index K = blocks[0].dictionary.cols();
  for (const auto& b : blocks) {
    if (b.dictionary.cols() != K) throw std::invalid_argument("group_lasso: K differs across blocks");
    if (b.observation.size() != b.dictionary.rows())
      throw std::invalid_argument("group_lasso: observation size mismatch");
  }
  if (beta < 0.0) throw std::invalid_argument("group_lasso: beta must be >= 0");

  std::vector<VectorC> r(Q);
  Eigen::MatrixXd d(K, Q);
  std::vector<double> noise_norm2(Q, 0.0);
  for (Eigen::Index q = 0; q < Q; ++q) {
    r[q] = blocks[q].observation;
    for (Eigen::Index k = 0; k < K; ++k) d(k, q) = blocks[q].dictionary.col(k).squaredNorm();
    if (blocks[q].noise_column.size()) noise_norm2[q] = blocks[q].noise_column.squaredNorm();
  }

  GroupLassoResult res;
  res.solutions = Eigen::MatrixXd::Zero(K, Q);
  res.noise_powers.assign(Q, 0.0);

  res.converged = false;
  int sweeps = 0;
  Eigen::VectorXd c(Q), g(Q);
  while (sweeps < opt.max_sweeps) {
    ++sweeps;
    double max_change = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) {
      for (Eigen::Index q = 0; q < Q; ++q)
        c(q) = blocks[q].dictionary.col(k).dot(r[q]).real() + d(k, q) * res.solutions(k, q);
      detail::group_prox(d.row(k).transpose(), c, beta, g);
      for (Eigen::Index q = 0; q < Q; ++q) {
        const double delta = g(q) - res.solutions(k, q);
        if (delta != 0.0) {
          r[q] -= blocks[q].dictionary.col(k) * delta;
          res.solutions(k, q) = g(q);
          max_change = std::max(max_change, std::abs(delta));
        }
      }
    }
    for (Eigen::Index q = 0; q < Q; ++q) {
      if (noise_norm2[q] < 1e-300) continue;
      const double raw = blocks[q].noise_column.dot(r[q]).real() + noise_norm2[q] * res.noise_powers[q];
      const double w = std::max(0.0, raw / noise_norm2[q]);
      const double delta = w - res.noise_powers[q];
      if (delta != 0.0) {
        r[q] -= blocks[q].noise_column * delta;
        res.noise_powers[q] = w;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    if (max_change < opt.tol) {
      res.converged = true;
      break;
    }
  }

  double rss = 0.0;
  for (const auto& rq : r) rss += rq.squaredNorm();
  double pen = 0.0;
  for (Eigen::Index k = 0; k < K; ++k) pen += res.solutions.row(k).norm();
  res.objective = 0.5 * rss + beta * pen;
  res.sweeps = sweeps;
  return res;
}

}  // namespace doalab
