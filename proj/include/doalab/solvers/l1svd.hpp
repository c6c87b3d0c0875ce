#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <stdexcept>

#include "doalab/spectrum.hpp"

namespace doalab {

/// Data-domain group-sparse recovery: the snapshot block is reduced to its
/// top singular directions and scaled to unit Frobenius norm, then
/// min (1/2)||X_sv - A S||_F^2 + lambda sum_k ||row_k(S)||_2 is solved by
/// row-block coordinate descent. The reduction dimension is clamped to
/// min(D, N_A): requesting more sources than array rows keeps the run valid
/// but cannot be recovered (the spectrum simply misses targets).
inline SpatialSpectrum l1_svd(const SnapshotMatrix& x, int D, const Grid& grid, double lambda,
                              int max_sweeps = 4000) {
  const Eigen::Index n = x.data.rows();
  const Eigen::Index t = x.data.cols();
  if (D < 1) throw std::invalid_argument("l1_svd: D must be >= 1");
  if (t < D && t < n) throw std::invalid_argument("l1_svd: T must be >= min(D, N_A)");
  const Eigen::Index dr = std::min<Eigen::Index>(D, std::min(n, t));

  Eigen::JacobiSVD<MatrixC> svd(x.data, Eigen::ComputeThinV);
  MatrixC xsv = x.data * svd.matrixV().leftCols(dr);
  const double scale = xsv.norm();
  if (scale > 0.0) xsv /= scale;

  const MatrixC a = manifold(x.positions, x.unit_spacing_d0, x.alpha.to_double(), grid.angles_deg);
  const Eigen::Index K = a.cols();
  Eigen::VectorXd d(K);
  for (Eigen::Index k = 0; k < K; ++k) d(k) = a.col(k).squaredNorm();

  MatrixC s = MatrixC::Zero(K, dr);
  MatrixC r = xsv;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) {
      const Eigen::RowVectorXcd u = a.col(k).adjoint() * r + d(k) * s.row(k);
      const double mag = u.norm();
      Eigen::RowVectorXcd v;
      if (mag <= lambda)
        v = Eigen::RowVectorXcd::Zero(dr);
      else
        v = u * ((mag - lambda) / (mag * d(k)));
      const Eigen::RowVectorXcd delta = v - s.row(k);
      if (delta.norm() > 0.0) {
        r -= a.col(k) * delta;
        s.row(k) = v;
        max_change = std::max(max_change, delta.norm());
      }
    }
    if (max_change < 1e-9) break;
  }

  SpatialSpectrum spec;
  spec.angles_deg = grid.angles_deg;
  spec.values.resize(K);
  for (Eigen::Index k = 0; k < K; ++k) spec.values[k] = s.row(k).norm();
  return spec;
}

}  // namespace doalab
