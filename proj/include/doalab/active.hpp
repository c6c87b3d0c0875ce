#pragma once

#include <Eigen/Dense>
#include <stdexcept>

#include "doalab/geometry.hpp"
#include "doalab/spectrum.hpp"

namespace doalab {

/// Co-prime transmit/receive implementations: a (2M-1)-element ULA with
/// spacing N paired with an N-element ULA with spacing M.
///   A: first ULA transmits, second receives.
///   B: first ULA transmits, both receive.
///   C: the whole co-prime array transmits and receives.
inline std::pair<ArrayGeometry, ArrayGeometry> coprime_txrx(int M, int N, char config,
                                                            double unit_spacing_d0 = 0.5) {
  require_coprime(M, N);
  std::vector<int> first;
  for (int m = 1; m <= 2 * M - 1; ++m) first.push_back(m * N);
  std::vector<int> second;
  for (int n = 0; n < N; ++n) second.push_back(n * M);
  std::vector<int> both = first;
  both.insert(both.end(), second.begin(), second.end());
  switch (config) {
    case 'A':
      return {ArrayGeometry(first, unit_spacing_d0), ArrayGeometry(second, unit_spacing_d0)};
    case 'B':
      return {ArrayGeometry(first, unit_spacing_d0), ArrayGeometry(both, unit_spacing_d0)};
    case 'C':
      return {ArrayGeometry(both, unit_spacing_d0), ArrayGeometry(both, unit_spacing_d0)};
    default:
      throw std::invalid_argument("coprime_txrx: config must be A, B, or C");
  }
}

struct Table61Counts {
  int l_sc = 0;    // unique sum-coarray elements
  int l_dcsc = 0;  // unique elements of the difference coarray of the sum coarray
};

/// Closed-form counts for the three co-prime transmit/receive configurations.
inline Table61Counts table61_counts(int M, int N, char config) {
  require_coprime(M, N);
  Table61Counts t;
  switch (config) {
    case 'A':
      t.l_sc = (2 * M - 1) * N;
      t.l_dcsc = (5 * M - 3) * N - M;
      break;
    case 'B':
      t.l_sc = (2 * M - 1) * (N + 1);
      t.l_dcsc = (7 * M - 5) * N + M;
      break;
    case 'C':
      t.l_sc = 2 * M * (N + 1) - 1;
      t.l_dcsc = (7 * M - 3) * N + M;
      break;
    default:
      throw std::invalid_argument("table61_counts: config must be A, B, or C");
  }
  return t;
}

struct ResolvabilityResult {
  bool resolvable = false;
  int l_dcsc = 0;
  int l_nz = 0;  // D + coherent pairs
  int slack = 0;
};

/// Unique-solution condition for the sum-coarray sparse reconstruction:
/// L_DCSC >= 2 (D + C) with C the number of coherent target pairs.
inline ResolvabilityResult resolvability_check(const ArrayGeometry& tx, const ArrayGeometry& rx,
                                               int D, int coherent_pairs) {
  if (D < 0 || coherent_pairs < 0)
    throw std::invalid_argument("resolvability_check: counts must be >= 0");
  ResolvabilityResult r;
  r.l_dcsc = dcsc(tx, rx).unique_count();
  r.l_nz = D + coherent_pairs;
  r.slack = r.l_dcsc - 2 * r.l_nz;
  r.resolvable = r.slack >= 0;
  return r;
}

/// Sparse estimate of the gridded target covariance.
struct SourceCovarianceEstimate {
  MatrixC values;  // K x K Hermitian, diagonal real >= 0
  int nonzero_count = 0;

  bool hermitian(double tol = 1e-9) const {
    return (values - values.adjoint()).norm() <= tol * std::max(1.0, values.norm());
  }
};

struct DcscOptions {
  int max_grid_points = 61;   // K cap for the K(K+1)/2 unknown count
  double tol = 1e-8;
  int max_full_sweeps = 60;   // full passes; active-set passes run in between
  int max_active_sweeps = 200;
  // The sample noise floor sigma^2 I stays in the residual by default. An
  // unpenalized noise unknown makes the reconstruction degenerate: target
  // powers ride the free identity atom while cheap conjugate-pair terms
  // absorb the cross lags, and the minimizer stops being the physical
  // covariance.
  bool noise_unknown = false;
};

struct DcscResult {
  SpatialSpectrum spectrum;  // diagonal of the estimate
  SourceCovarianceEstimate source_covariance;
  double noise_power = 0.0;
  bool converged = true;
  bool large_problem_warning = false;  // over 1e4 unknowns
  double objective = 0.0;
  double kkt_residual = 0.0;  // stationarity violation at the returned point
};

namespace detail {

/// Exact prox for one tied conjugate off-diagonal pair: minimize
/// (1/2) x^T H x - c^T x + penalty ||x|| over x = (Re v, Im v), where
/// H = 2 L^2 I + 2 [[Re s^2, Im s^2], [Im s^2, -Re s^2]] has eigenvalues
/// 2(L^2 +- |s|^2) with a closed-form rotation.
inline cd offdiag_prox(double l2norm2, cd s, cd c, double penalty) {
  const cd s2 = s * s;
  const double rho = std::norm(s);  // |s|^2
  const double h1 = 2.0 * (l2norm2 + rho);
  const double h2 = 2.0 * (l2norm2 - rho);
  const double t_rot = 0.5 * std::atan2(s2.imag(), s2.real());
  const double ct = std::cos(t_rot), st = std::sin(t_rot);
  // rotate c into the eigenbasis (v1 = (ct, st), v2 = (-st, ct))
  const double c1 = ct * c.real() + st * c.imag();
  const double c2 = -st * c.real() + ct * c.imag();
  const double thresh2 = c1 * c1 + c2 * c2;
  if (thresh2 <= penalty * penalty) return cd(0, 0);
  // || xi(t) || = t with xi_i = c_i t / (h_i t + penalty), bisection on t
  double lo = 0.0, hi = std::sqrt((c1 / h1) * (c1 / h1) + (c2 / std::max(h2, 1e-12)) *
                                                             (c2 / std::max(h2, 1e-12))) + 1e-30;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double x1 = c1 * mid / (h1 * mid + penalty);
    const double x2 = h2 > 0.0 ? c2 * mid / (h2 * mid + penalty) : 0.0;
    if (std::sqrt(x1 * x1 + x2 * x2) > mid)
      lo = mid;
    else
      hi = mid;
  }
  const double t = 0.5 * (lo + hi);
  const double x1 = c1 * t / (h1 * t + penalty);
  const double x2 = h2 > 0.0 ? c2 * t / (h2 * t + penalty) : 0.0;
  // rotate back
  return cd(ct * x1 - st * x2, st * x1 + ct * x2);
}

}  // namespace detail

/// Reconstruct the gridded target covariance from the sum-coarray data
/// covariance: minimize ||vec(R_sum) - (A* (x) A) vec(Rss)|| +
/// lambda ||vec(Rss)||_1 with Hermitian symmetry enforced by optimizing the
/// lower triangle only and a nonnegative diagonal. The plain (not squared)
/// data norm keeps lambda scale-free; coordinate descent runs on the
/// rescaled squared problem, re-estimating the residual norm between rounds.
/// The residual is kept as an L x L matrix so every inner product is a
/// steering quadratic form.
inline DcscResult dcsc_sparse_doa(const CovarianceMatrix& r_sum, const ArrayGeometry& tx,
                                  const ArrayGeometry& rx, const Grid& grid, double lambda,
                                  const DcscOptions& opt = {}) {
  const Coarray sc = sum_coarray(tx, rx);
  const int L = sc.unique_count();
  if (r_sum.dim() != L)
    throw std::invalid_argument("dcsc_sparse_doa: covariance does not match the sum coarray");
  const int K = grid.size();
  if (K > opt.max_grid_points)
    throw std::invalid_argument("dcsc_sparse_doa: grid of " + std::to_string(K) +
                                " points exceeds the configured cap of " +
                                std::to_string(opt.max_grid_points) +
                                " (raise max_grid_points deliberately)");
  DcscResult out;
  out.large_problem_warning = static_cast<long>(K) * (K + 1) / 2 > 10000;

  const MatrixC a = manifold(sc.lags, tx.unit_spacing_d0, 1.0, grid.angles_deg);
  const double l2 = static_cast<double>(L);        // ||a_k||^2 (unit-modulus entries)
  const double diag_norm2 = l2 * l2;               // ||a_k* (x) a_k||^2

  MatrixC gram = a.adjoint() * a;  // s_{ij} = a_i^H a_j

  Eigen::VectorXd diag = Eigen::VectorXd::Zero(K);
  MatrixC lower = MatrixC::Zero(K, K);  // strictly lower triangle holds v_ij
  double noise = 0.0;

  MatrixC resid = r_sum.values;

  out.converged = false;
  double lambda_eff = lambda * resid.norm();
  const double scale_floor = 1e-8 * resid.norm();

  auto update_diag = [&](int k) {
    const double corr = (a.col(k).adjoint() * (resid * a.col(k)))(0).real();
    const double raw = corr + diag_norm2 * diag(k);
    const double v = std::max(0.0, (raw - lambda_eff) / diag_norm2);
    const double delta = v - diag(k);
    if (delta != 0.0) {
      resid.noalias() -= delta * (a.col(k) * a.col(k).adjoint());
      diag(k) = v;
    }
    return std::abs(delta);
  };
  auto update_pair = [&](int i, int j) {
    const cd s = gram(i, j);
    const cd u1 = (a.col(i).adjoint() * (resid * a.col(j)))(0);
    const cd v_old = lower(i, j);
    // linear term of the 2x2 subproblem around r~ = resid + old pair
    // contribution: d1^H r~ = u1 + v_old L^2 + conj(v_old) s^2, and the
    // Hermitian residual ties the second column to its conjugate
    const cd cc = 2.0 * (u1 + v_old * (l2 * l2) + std::conj(v_old) * (s * s));
    const cd v_new = detail::offdiag_prox(l2 * l2, s, cc, 2.0 * lambda_eff);
    const cd delta = v_new - v_old;
    if (delta != cd(0, 0)) {
      resid.noalias() -= delta * (a.col(i) * a.col(j).adjoint());
      resid.noalias() -= std::conj(delta) * (a.col(j) * a.col(i).adjoint());
      lower(i, j) = v_new;
    }
    return std::abs(delta);
  };
  auto update_noise = [&]() {
    if (!opt.noise_unknown) return 0.0;
    const double raw = resid.trace().real() + l2 * noise;
    const double v = std::max(0.0, raw / l2);
    const double delta = v - noise;
    if (delta != 0.0) {
      resid.diagonal().array() -= delta;
      noise = v;
    }
    return std::abs(delta);
  };

  for (int round = 0; round < 40; ++round) {
    bool inner_done = false;
    for (int full = 0; full < opt.max_full_sweeps; ++full) {
      double max_change = 0.0;
      for (int k = 0; k < K; ++k) max_change = std::max(max_change, update_diag(k));
      for (int i = 1; i < K; ++i)
        for (int j = 0; j < i; ++j) max_change = std::max(max_change, update_pair(i, j));
      max_change = std::max(max_change, update_noise());
      if (max_change < opt.tol) {
        inner_done = true;
        break;
      }
      // cheap passes over the active support until it stabilizes
      for (int act = 0; act < opt.max_active_sweeps; ++act) {
        double change = 0.0;
        for (int k = 0; k < K; ++k)
          if (diag(k) > 0.0) change = std::max(change, update_diag(k));
        for (int i = 1; i < K; ++i)
          for (int j = 0; j < i; ++j)
            if (lower(i, j) != cd(0, 0)) change = std::max(change, update_pair(i, j));
        change = std::max(change, update_noise());
        if (change < opt.tol) break;
      }
    }
    const double next = lambda * std::max(resid.norm(), scale_floor);
    const bool stable = std::abs(next - lambda_eff) <= 1e-6 * std::max(1.0, lambda_eff);
    lambda_eff = next;
    if (inner_done && stable) {
      out.converged = true;
      break;
    }
  }

  // stationarity certificate at the returned point
  {
    double worst = 0.0;
    for (int k = 0; k < K; ++k) {
      const double g = -(a.col(k).adjoint() * (resid * a.col(k)))(0).real() + lambda_eff;
      worst = std::max(worst, diag(k) > 0.0 ? std::abs(g) : std::max(0.0, -g));
    }
    for (int i = 1; i < K; ++i)
      for (int j = 0; j < i; ++j) {
        const cd grad = -2.0 * (a.col(i).adjoint() * (resid * a.col(j)))(0);
        const cd v = lower(i, j);
        if (v == cd(0, 0)) {
          worst = std::max(worst, std::max(0.0, std::abs(grad) - 2.0 * lambda_eff));
        } else {
          worst = std::max(worst, std::abs(grad + 2.0 * lambda_eff * v / std::abs(v)));
        }
      }
    if (opt.noise_unknown) {
      const double g = -resid.trace().real();
      worst = std::max(worst, noise > 0.0 ? std::abs(g) : std::max(0.0, -g));
    }
    out.kkt_residual = worst;
  }

  out.spectrum.angles_deg = grid.angles_deg;
  out.spectrum.values.assign(diag.data(), diag.data() + K);
  out.source_covariance.values = lower + lower.adjoint();
  out.source_covariance.values.diagonal() = diag.cast<cd>();
  out.noise_power = noise;
  int nnz = 0;
  for (int k = 0; k < K; ++k) nnz += diag(k) > 0.0;
  for (int i = 1; i < K; ++i)
    for (int j = 0; j < i; ++j) nnz += 2 * (lower(i, j) != cd(0, 0));
  out.source_covariance.nonzero_count = nnz;
  double pen = diag.sum();
  for (int i = 1; i < K; ++i)
    for (int j = 0; j < i; ++j) pen += 2.0 * std::abs(lower(i, j));
  out.objective = resid.norm() + lambda * pen;
  return out;
}

}  // namespace doalab
