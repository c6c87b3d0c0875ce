#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <stdexcept>
#include <vector>

#include "doalab/spectrum.hpp"

namespace doalab {

/// Lag-domain observation vector: redundant covariance entries averaged per
/// lag. z(-l) = conj(z(l)) for difference-type observations.
struct CoarrayObservation {
  std::vector<int> lags;  // sorted
  VectorC z;
  int noise_lag_index = -1;  // position of lag 0
  double unit_spacing_d0 = 0.5;
  std::vector<bool> synthesized;  // set by the interpolation stage

  int size() const { return static_cast<int>(lags.size()); }
  bool contiguous() const {
    for (std::size_t i = 1; i < lags.size(); ++i)
      if (lags[i] != lags[i - 1] + 1) return false;
    return !lags.empty();
  }

  /// CSV `lag,re,im,synthesized_flag`.
  void write_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os << "lag,re,im,synthesized_flag\n" << std::setprecision(12);
    for (int i = 0; i < size(); ++i)
      os << lags[i] << "," << z(i).real() << "," << z(i).imag() << ","
         << (synthesized.empty() ? 0 : int(synthesized[i])) << "\n";
  }
};

/// Hermitian eigendecomposition with eigenvalues sorted descending and a
/// deterministic phase convention (first non-negligible component real
/// positive) so equal-eigenvalue ties do not reorder results between runs.
struct EigenDecomposition {
  Eigen::VectorXd eigenvalues;  // descending
  MatrixC eigenvectors;         // columns match eigenvalues
};

inline EigenDecomposition hermitian_eig(const MatrixC& r) {
  Eigen::SelfAdjointEigenSolver<MatrixC> es(r);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
  const Eigen::Index n = r.rows();
  EigenDecomposition out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.eigenvalues(i) = es.eigenvalues()(n - 1 - i);
    VectorC v = es.eigenvectors().col(n - 1 - i);
    for (Eigen::Index k = 0; k < n; ++k) {
      if (std::abs(v(k)) > 1e-12) {
        v *= std::polar(1.0, -std::arg(v(k)));
        break;
      }
    }
    out.eigenvectors.col(i) = v;
  }
  return out;
}

/// Delay-and-sum spectrum P(theta) = a^H R a.
inline SpatialSpectrum das_spectrum(const MatrixC& r, const std::vector<int>& positions,
                                    double unit_spacing_d0, const Grid& grid) {
  if (r.rows() != r.cols() || r.rows() != static_cast<Eigen::Index>(positions.size()))
    throw std::invalid_argument("das_spectrum: dimension mismatch");
  SpatialSpectrum s;
  s.angles_deg = grid.angles_deg;
  s.values.resize(grid.size());
  for (int k = 0; k < grid.size(); ++k) {
    const VectorC a = steering_vector(positions, unit_spacing_d0, 1.0, grid.angles_deg[k]);
    s.values[k] = std::max(0.0, (a.adjoint() * r * a)(0).real());
  }
  return s;
}

inline SpatialSpectrum das_spectrum(const CovarianceMatrix& r, const ArrayGeometry& geom,
                                    const Grid& grid) {
  return das_spectrum(r.values, geom.positions, geom.unit_spacing_d0, grid);
}

/// MUSIC pseudospectrum 1 / (a^H En En^H a) with the noise subspace spanned
/// by the eigenvectors past the D largest eigenvalues.
inline SpatialSpectrum music_spectrum(const MatrixC& r, const std::vector<int>& positions,
                                      double unit_spacing_d0, int D, const Grid& grid) {
  const Eigen::Index n = r.rows();
  if (D < 1 || D >= n) throw std::invalid_argument("music_spectrum: need 1 <= D < dim");
  const EigenDecomposition ed = hermitian_eig(r);
  const MatrixC en = ed.eigenvectors.rightCols(n - D);
  SpatialSpectrum s;
  s.angles_deg = grid.angles_deg;
  s.values.resize(grid.size());
  for (int k = 0; k < grid.size(); ++k) {
    const VectorC a = steering_vector(positions, unit_spacing_d0, 1.0, grid.angles_deg[k]);
    const double den = (en.adjoint() * a).squaredNorm();
    s.values[k] = 1.0 / std::max(den, 1e-300);
  }
  return s;
}

inline SpatialSpectrum music_spectrum(const CovarianceMatrix& r, const ArrayGeometry& geom, int D,
                                      const Grid& grid) {
  return music_spectrum(r.values, geom.positions, geom.unit_spacing_d0, D, grid);
}

namespace detail {

/// Coefficients c_l = sum of the l-th diagonal of En En^H, l = -(n-1)..n-1,
/// returned low-to-high so index l+n-1 holds c_l.
inline VectorC root_music_coefficients(const MatrixC& en) {
  const Eigen::Index n = en.rows();
  const MatrixC c = en * en.adjoint();
  VectorC coef = VectorC::Zero(2 * n - 1);
  for (Eigen::Index m = 0; m < n; ++m)
    for (Eigen::Index k = 0; k < n; ++k) coef(m - k + n - 1) += c(m, k);
  return coef;
}

/// Roots of a complex polynomial via the companion matrix; coefficients are
/// ascending powers.
inline std::vector<cd> polynomial_roots(const VectorC& coef_ascending) {
  Eigen::Index deg = coef_ascending.size() - 1;
  while (deg > 0 && std::abs(coef_ascending(deg)) < 1e-14 * coef_ascending.cwiseAbs().maxCoeff())
    --deg;
  if (deg < 1) return {};
  MatrixC companion = MatrixC::Zero(deg, deg);
  for (Eigen::Index i = 1; i < deg; ++i) companion(i, i - 1) = 1.0;
  for (Eigen::Index i = 0; i < deg; ++i)
    companion(i, deg - 1) = -coef_ascending(i) / coef_ascending(deg);
  Eigen::ComplexEigenSolver<MatrixC> es(companion, /*computeEigenvectors=*/false);
  std::vector<cd> roots(es.eigenvalues().data(), es.eigenvalues().data() + deg);
  return roots;
}

}  // namespace detail

/// Root-MUSIC on a uniform array: roots the degree-2(N-1) polynomial built
/// from the noise-subspace diagonal sums and maps the D in-circle roots of
/// largest magnitude to angles via asin(arg(z) / (k0 d0)). Roots whose
/// argument maps outside [-1, 1] are discarded and counted.
inline DoaEstimate root_music(const MatrixC& r, int D, double unit_spacing_d0) {
  const Eigen::Index n = r.rows();
  if (D < 1 || D >= n) throw std::invalid_argument("root_music: need 1 <= D < dim");
  const EigenDecomposition ed = hermitian_eig(r);
  const MatrixC en = ed.eigenvectors.rightCols(n - D);
  // D(z) = sum c_l z^-l; multiplying by z^(n-1) gives ascending coefficients
  // c_{n-1}, ..., c_{-(n-1)}.
  const VectorC c = detail::root_music_coefficients(en);
  VectorC coef(2 * n - 1);
  for (Eigen::Index k = 0; k < 2 * n - 1; ++k) coef(k) = c(2 * n - 2 - k);
  std::vector<cd> roots = detail::polynomial_roots(coef);

  std::vector<cd> inside;
  for (const cd& z : roots)
    if (std::abs(z) < 1.0) inside.push_back(z);
  std::sort(inside.begin(), inside.end(),
            [](const cd& a, const cd& b) { return std::abs(a) > std::abs(b); });

  DoaEstimate est;
  const double k0d0 = 2.0 * std::numbers::pi * unit_spacing_d0;
  for (const cd& z : inside) {
    if (static_cast<int>(est.angles_deg.size()) == D) break;
    const double s = std::arg(z) / k0d0;
    if (std::abs(s) > 1.0) {
      ++est.discarded_roots;
      continue;
    }
    est.angles_deg.push_back(rad2deg(std::asin(s)));
  }
  std::sort(est.angles_deg.begin(), est.angles_deg.end());
  return est;
}

inline DoaEstimate root_music(const CovarianceMatrix& r, int D, const ArrayGeometry& geom) {
  for (std::size_t i = 1; i < geom.positions.size(); ++i)
    if (geom.positions[i] - geom.positions[i - 1] != geom.positions[1] - geom.positions[0])
      throw std::invalid_argument("root_music: geometry must be uniform");
  return root_music(r.values, D, geom.unit_spacing_d0 * (geom.size() > 1 ? geom.positions[1] - geom.positions[0] : 1));
}

/// Average the covariance entries per difference lag (the vectorized
/// covariance model collapsed onto unique coarray elements).
inline CoarrayObservation vectorize_to_coarray(const CovarianceMatrix& r, const ArrayGeometry& geom) {
  if (r.dim() != geom.size()) throw std::invalid_argument("vectorize_to_coarray: dimension mismatch");
  std::map<int, cd> sum;
  std::map<int, int> cnt;
  for (int m = 0; m < geom.size(); ++m)
    for (int n = 0; n < geom.size(); ++n) {
      const int lag = geom.positions[m] - geom.positions[n];
      sum[lag] += r.values(m, n);
      ++cnt[lag];
    }
  CoarrayObservation obs;
  obs.unit_spacing_d0 = geom.unit_spacing_d0;
  obs.z.resize(static_cast<Eigen::Index>(sum.size()));
  int i = 0;
  for (const auto& [lag, v] : sum) {
    obs.lags.push_back(lag);
    obs.z(i) = v / static_cast<double>(cnt[lag]);
    if (lag == 0) obs.noise_lag_index = i;
    ++i;
  }
  return obs;
}

/// Spatially smoothed covariance of a contiguous lag observation: the
/// (L+1) overlapping subvectors of length L+1 averaged as outer products.
inline MatrixC spatial_smoothing_covariance(const CoarrayObservation& zf) {
  if (!zf.contiguous()) throw std::invalid_argument("spatial smoothing requires contiguous lags");
  const int lmax = zf.lags.back();
  if (zf.lags.front() != -lmax || lmax < 1)
    throw std::invalid_argument("spatial smoothing requires lags [-L, L] with L >= 1");
  const int L = lmax;
  auto at = [&](int lag) { return zf.z(lag + L); };
  MatrixC rzz = MatrixC::Zero(L + 1, L + 1);
  for (int p = 1; p <= L + 1; ++p) {
    VectorC zp(L + 1);
    for (int m = 0; m <= L; ++m) zp(m) = at(m + 1 - p);
    rzz += zp * zp.adjoint();
  }
  rzz /= static_cast<double>(L + 1);
  return ((rzz + rzz.adjoint()) * 0.5).eval();
}

/// MUSIC applied to the spatially smoothed coarray covariance; resolves up to
/// L sources from a contiguous coarray of half extent L.
inline SpatialSpectrum spatial_smoothing_music(const CoarrayObservation& zf, int D, const Grid& grid) {
  const MatrixC rzz = spatial_smoothing_covariance(zf);
  const int L = static_cast<int>(rzz.rows()) - 1;
  if (D > L) throw std::invalid_argument("spatial_smoothing_music: D must be <= L");
  std::vector<int> virtual_positions(L + 1);
  std::iota(virtual_positions.begin(), virtual_positions.end(), 0);
  return music_spectrum(rzz, virtual_positions, zf.unit_spacing_d0, D, grid);
}

/// (L+1)x(L+1) augmented covariance with entry (i,j) equal to the averaged
/// lag value at (i-j) d0, over the contiguous part [-L, L] of the coarray.
inline MatrixC augmented_covariance(const CovarianceMatrix& r, const ArrayGeometry& geom) {
  const CoarrayObservation obs = vectorize_to_coarray(r, geom);
  const Coarray ca = difference_coarray(geom);
  const int L = ca.contiguous_half_extent;
  if (L < 1) throw std::invalid_argument("augmented_covariance: no contiguous lags beyond zero");
  auto at = [&](int lag) {
    const auto it = std::lower_bound(obs.lags.begin(), obs.lags.end(), lag);
    return obs.z(static_cast<Eigen::Index>(it - obs.lags.begin()));
  };
  MatrixC aug(L + 1, L + 1);
  for (int i = 0; i <= L; ++i)
    for (int j = 0; j <= L; ++j) aug(i, j) = at(i - j);
  return aug;
}

inline SpatialSpectrum augmented_covariance_music(const CovarianceMatrix& r,
                                                  const ArrayGeometry& geom, int D,
                                                  const Grid& grid) {
  const MatrixC aug = augmented_covariance(r, geom);
  const int L = static_cast<int>(aug.rows()) - 1;
  std::vector<int> virtual_positions(L + 1);
  std::iota(virtual_positions.begin(), virtual_positions.end(), 0);
  return music_spectrum(aug, virtual_positions, geom.unit_spacing_d0, D, grid);
}

}  // namespace doalab
