#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "doalab/geometry.hpp"
#include "doalab/rational.hpp"

namespace doalab {

using cd = std::complex<double>;
using MatrixC = Eigen::MatrixXcd;
using VectorC = Eigen::VectorXcd;

/// Seeded generator with explicit Box-Muller normals so that streams do not
/// depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  /// Circular complex Gaussian with E|z|^2 = 1.
  cd cnormal() { return cd(normal(), normal()) * std::numbers::sqrt2 / 2.0; }

  std::uint64_t bits() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

enum class WaveformKind { gaussian, bpsk };

/// Ground truth for a simulation run: directions, per-frequency powers, and
/// coherence structure (sources in one group share a waveform up to fixed
/// complex gains).
struct SourceScene {
  std::vector<double> directions_deg;
  std::vector<Rational> frequencies{Rational(1)};   // operating ratios alpha_q
  Eigen::MatrixXd powers;                           // D x Q linear powers
  std::vector<std::vector<int>> coherence_groups;   // empty = all uncorrelated
  WaveformKind waveform_kind = WaveformKind::gaussian;

  static SourceScene uniform_power(std::vector<double> dirs_deg, double power_linear = 1.0) {
    SourceScene s;
    s.directions_deg = std::move(dirs_deg);
    s.powers = Eigen::MatrixXd::Constant(static_cast<int>(s.directions_deg.size()), 1, power_linear);
    return s;
  }

  int source_count() const { return static_cast<int>(directions_deg.size()); }

  int frequency_index(const Rational& alpha) const {
    for (std::size_t q = 0; q < frequencies.size(); ++q)
      if (frequencies[q] == alpha) return static_cast<int>(q);
    throw std::invalid_argument("SourceScene: frequency " + alpha.str() + " not in scene");
  }

  void validate() const {
    if (directions_deg.empty()) throw std::invalid_argument("scene: no sources");
    for (double d : directions_deg)
      if (!(std::abs(d) < 90.0)) throw std::invalid_argument("scene: |direction| must be < 90 deg");
    for (std::size_t i = 0; i < directions_deg.size(); ++i)
      for (std::size_t j = i + 1; j < directions_deg.size(); ++j)
        if (directions_deg[i] == directions_deg[j])
          throw std::invalid_argument("scene: duplicate directions");
    if (powers.rows() != source_count() || powers.cols() != static_cast<int>(frequencies.size()))
      throw std::invalid_argument("scene: powers must be D x Q");
    if (powers.minCoeff() < 0.0) throw std::invalid_argument("scene: negative power");
    for (int q = 0; q < powers.cols(); ++q)
      if (powers.col(q).maxCoeff() <= 0.0)
        throw std::invalid_argument("scene: all powers zero at one frequency");
  }

  /// Group index per source; ungrouped sources become singleton groups.
  std::vector<int> group_of_source() const {
    std::vector<int> g(directions_deg.size(), -1);
    int next = 0;
    for (const auto& grp : coherence_groups) {
      for (int s : grp) {
        if (s < 0 || s >= source_count() || g[s] != -1)
          throw std::invalid_argument("scene: coherence groups must partition source indices");
        g[s] = next;
      }
      ++next;
    }
    for (auto& v : g)
      if (v == -1) v = next++;
    return g;
  }

  int group_count() const {
    const auto g = group_of_source();
    return g.empty() ? 0 : *std::max_element(g.begin(), g.end()) + 1;
  }
};

/// Complex sensor-by-time data block.
struct SnapshotMatrix {
  MatrixC data;            // N_A x T
  std::vector<int> positions;
  double unit_spacing_d0 = 0.5;
  Rational alpha{1};

  int sensors() const { return static_cast<int>(data.rows()); }
  int snapshots() const { return static_cast<int>(data.cols()); }

  /// Binary export: little-endian u64 header (N_A, T), then row-major
  /// interleaved re/im doubles.
  void write_binary(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path);
    const std::uint64_t n = static_cast<std::uint64_t>(data.rows());
    const std::uint64_t t = static_cast<std::uint64_t>(data.cols());
    os.write(reinterpret_cast<const char*>(&n), 8);
    os.write(reinterpret_cast<const char*>(&t), 8);
    for (Eigen::Index i = 0; i < data.rows(); ++i)
      for (Eigen::Index j = 0; j < data.cols(); ++j) {
        const double re = data(i, j).real(), im = data(i, j).imag();
        os.write(reinterpret_cast<const char*>(&re), 8);
        os.write(reinterpret_cast<const char*>(&im), 8);
      }
  }

  static SnapshotMatrix read_binary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::uint64_t n = 0, t = 0;
    is.read(reinterpret_cast<char*>(&n), 8);
    is.read(reinterpret_cast<char*>(&t), 8);
    SnapshotMatrix out;
    out.data.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(t));
    for (std::uint64_t i = 0; i < n; ++i)
      for (std::uint64_t j = 0; j < t; ++j) {
        double re = 0, im = 0;
        is.read(reinterpret_cast<char*>(&re), 8);
        is.read(reinterpret_cast<char*>(&im), 8);
        out.data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cd(re, im);
      }
    if (!is) throw std::runtime_error("truncated snapshot file " + path);
    return out;
  }
};

struct CovarianceMatrix {
  MatrixC values;  // Hermitian N_A x N_A
  int snapshot_count = 0;

  int dim() const { return static_cast<int>(values.rows()); }
};

inline double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Steering vector over integer positions (in d0 units): element i equals
/// exp(j 2*pi alpha d0 n_i sin(theta)) with d0 in wavelengths at the
/// reference frequency.
inline VectorC steering_vector(const std::vector<int>& positions, double unit_spacing_d0,
                               double alpha, double theta_deg) {
  VectorC a(static_cast<Eigen::Index>(positions.size()));
  const double phase_per_unit =
      2.0 * std::numbers::pi * alpha * unit_spacing_d0 * std::sin(deg2rad(theta_deg));
  for (std::size_t i = 0; i < positions.size(); ++i)
    a(static_cast<Eigen::Index>(i)) = std::polar(1.0, phase_per_unit * positions[i]);
  return a;
}

inline VectorC steering_vector(const ArrayGeometry& geom, double alpha, double theta_deg) {
  return steering_vector(geom.positions, geom.unit_spacing_d0, alpha, theta_deg);
}

/// Manifold matrix whose d-th column is the steering vector of angle d.
inline MatrixC manifold(const std::vector<int>& positions, double unit_spacing_d0, double alpha,
                        const std::vector<double>& thetas_deg) {
  MatrixC A(static_cast<Eigen::Index>(positions.size()),
            static_cast<Eigen::Index>(thetas_deg.size()));
  for (std::size_t d = 0; d < thetas_deg.size(); ++d)
    A.col(static_cast<Eigen::Index>(d)) =
        steering_vector(positions, unit_spacing_d0, alpha, thetas_deg[d]);
  return A;
}

class CouplingModel;  // forward declared; see coupling.hpp

namespace detail {

/// D x T source waveform block honoring coherence groups and per-frequency
/// powers. Coherent gains are fixed unit-magnitude random phases drawn once.
inline MatrixC source_waveforms(const SourceScene& scene, int freq_index, int T, Rng& rng) {
  const int D = scene.source_count();
  const auto group = scene.group_of_source();
  const int G = scene.group_count();

  std::vector<cd> gain(D);
  for (int d = 0; d < D; ++d) gain[d] = std::polar(1.0, rng.uniform(0.0, 2.0 * std::numbers::pi));

  MatrixC base(G, T);
  for (int g = 0; g < G; ++g)
    for (int t = 0; t < T; ++t)
      base(g, t) = (scene.waveform_kind == WaveformKind::bpsk)
                       ? cd(rng.uniform() < 0.5 ? -1.0 : 1.0, 0.0)
                       : rng.cnormal();

  MatrixC s(D, T);
  for (int d = 0; d < D; ++d) {
    const double amp = std::sqrt(scene.powers(d, freq_index));
    s.row(d) = amp * gain[d] * base.row(group[d]);
  }
  return s;
}

inline void add_noise(MatrixC& x, double noise_var, Rng& rng) {
  if (noise_var <= 0.0) return;
  const double amp = std::sqrt(noise_var);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index t = 0; t < x.cols(); ++t) x(i, t) += amp * rng.cnormal();
}

}  // namespace detail

/// x(t) = C A s(t) + n(t); C is identity when no coupling matrix is supplied.
/// Deterministic per (seed, inputs). Trials should split seeds as
/// trial_seed = base_seed + trial_index.
inline SnapshotMatrix generate_snapshots(const ArrayGeometry& geom, const SourceScene& scene,
                                         int T, double noise_var, std::uint64_t seed,
                                         const MatrixC* coupling = nullptr,
                                         Rational alpha = Rational(1)) {
  if (T < 1) throw std::invalid_argument("generate_snapshots: T must be >= 1");
  scene.validate();
  const int q = scene.frequency_index(alpha);

  Rng rng(seed);
  const MatrixC s = detail::source_waveforms(scene, q, T, rng);
  MatrixC A = manifold(geom.positions, geom.unit_spacing_d0, alpha.to_double(), scene.directions_deg);
  if (coupling) {
    if (coupling->rows() != geom.size() || coupling->cols() != geom.size())
      throw std::invalid_argument("generate_snapshots: coupling matrix dimension mismatch");
    A = (*coupling) * A;
  }

  SnapshotMatrix out;
  out.data = A * s;
  detail::add_noise(out.data, noise_var, rng);
  out.positions = geom.positions;
  out.unit_spacing_d0 = geom.unit_spacing_d0;
  out.alpha = alpha;
  return out;
}

/// Sum-coarray snapshots of an active transmit/receive pair: rows are indexed
/// by the unique sum-coarray positions (one representative measurement per
/// shared position).
inline SnapshotMatrix generate_active_snapshots(const ArrayGeometry& tx, const ArrayGeometry& rx,
                                                const SourceScene& scene, int T, double noise_var,
                                                std::uint64_t seed) {
  if (T < 1) throw std::invalid_argument("generate_active_snapshots: T must be >= 1");
  scene.validate();
  const Coarray sc = sum_coarray(tx, rx);

  Rng rng(seed);
  const MatrixC s = detail::source_waveforms(scene, 0, T, rng);
  const MatrixC A = manifold(sc.lags, tx.unit_spacing_d0, 1.0, scene.directions_deg);

  SnapshotMatrix out;
  out.data = A * s;
  detail::add_noise(out.data, noise_var, rng);
  out.positions = sc.lags;
  out.unit_spacing_d0 = tx.unit_spacing_d0;
  return out;
}

/// R = (1/T) X X^H, forced Hermitian.
inline CovarianceMatrix sample_covariance(const SnapshotMatrix& x) {
  CovarianceMatrix r;
  r.values = (x.data * x.data.adjoint()) / static_cast<double>(x.snapshots());
  r.values = ((r.values + r.values.adjoint()) * 0.5).eval();
  r.snapshot_count = x.snapshots();
  return r;
}

/// Trace normalization of the covariance: output trace equals N_A(w_q), the
/// number of sensors operated at that frequency.
inline CovarianceMatrix normalized_covariance(const CovarianceMatrix& r, int sensors_at_freq = -1) {
  const double tr = r.values.trace().real();
  if (!(tr > 0.0)) throw std::invalid_argument("normalized_covariance: trace must be positive");
  const int na = sensors_at_freq > 0 ? sensors_at_freq : r.dim();
  CovarianceMatrix out;
  out.values = r.values * (static_cast<double>(na) / tr);
  out.snapshot_count = r.snapshot_count;
  return out;
}

}  // namespace doalab
