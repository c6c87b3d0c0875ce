#pragma once

#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <vector>

#include "doalab/geometry.hpp"
#include "doalab/rational.hpp"
#include "doalab/solvers/lasso.hpp"
#include "doalab/subspace.hpp"

namespace doalab {

/// One frequency of a hole-filling plan: operating the pair that generates
/// `filler_lag` at ratio = hole/filler places a virtual sample exactly on the
/// hole.
struct FrequencyPlanEntry {
  Rational ratio;   // hole / filler, < 1
  int hole_lag = 0;
  int filler_lag = 0;
  std::vector<std::pair<int, int>> candidate_pairs;  // (low, high) positions, high - low = filler
  std::pair<int, int> chosen_pair{-1, -1};
};

struct FrequencyPlan {
  std::vector<FrequencyPlanEntry> entries;  // one per positive hole, ascending

  bool empty() const { return entries.empty(); }

  std::vector<Rational> unique_ratios() const {
    std::set<Rational> s;
    for (const auto& e : entries) s.insert(e.ratio);
    return {s.begin(), s.end()};
  }

  /// Ratios including the reference frequency, reference first.
  std::vector<Rational> operating_ratios() const {
    std::vector<Rational> r{Rational(1)};
    for (const auto& q : unique_ratios()) r.push_back(q);
    return r;
  }

  /// CSV `ratio_num,ratio_den,hole_lag,filler_lag,sensor_a,sensor_b`.
  void write_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os << "ratio_num,ratio_den,hole_lag,filler_lag,sensor_a,sensor_b\n";
    for (const auto& e : entries)
      os << e.ratio.num() << "," << e.ratio.den() << "," << e.hole_lag << "," << e.filler_lag
         << "," << e.chosen_pair.first << "," << e.chosen_pair.second << "\n";
  }
};

/// Minimum-separation ratio filling the first hole pair of the extended
/// co-prime coarray.
inline Rational dual_frequency_ratio(int M, int N) {
  require_coprime(M, N);
  return Rational(M * N + M, M * N + M + 1);
}

/// Largest ratio deviation |1 - alpha| over a complete hole-filling plan, as
/// a fraction of the reference frequency.
inline Rational max_frequency_separation(int M, int N) {
  require_coprime(M, N);
  const std::int64_t den = static_cast<std::int64_t>(2 * M - 1) * N - (N / M - 1) * M;
  return Rational(M - 1, den);
}

/// One ratio per positive hole: alpha = hole / (nearest present lag above the
/// hole). Ratios shared by several holes appear once per hole but compare
/// equal as rationals.
inline FrequencyPlan hole_filling_plan(const Coarray& coarray) {
  if (coarray.kind != CoarrayKind::difference)
    throw std::invalid_argument("hole_filling_plan: needs a difference coarray");
  FrequencyPlan plan;
  for (int h : coarray.holes) {
    int filler = -1;
    for (int l = h + 1; l <= coarray.max_lag(); ++l)
      if (coarray.contains(l)) {
        filler = l;
        break;
      }
    if (filler < 0)
      throw std::logic_error("hole_filling_plan: hole beyond the maximum lag");
    FrequencyPlanEntry e;
    e.ratio = Rational(h, filler);
    e.hole_lag = h;
    e.filler_lag = filler;
    plan.entries.push_back(e);
  }
  return plan;
}

struct SensorSelection {
  std::vector<int> sensors;  // positions operating at more than one frequency
  FrequencyPlan annotated;   // plan with candidate and chosen pairs filled in
};

/// Greedy minimum hitting set over the candidate generating pairs of each
/// planned filler lag, preferring pairs that reuse already selected sensors.
inline SensorSelection multifreq_sensor_selection(const ArrayGeometry& geom,
                                                  const FrequencyPlan& plan) {
  SensorSelection sel;
  sel.annotated = plan;
  std::set<int> chosen;
  for (auto& e : sel.annotated.entries) {
    e.candidate_pairs.clear();
    for (std::size_t i = 0; i < geom.positions.size(); ++i)
      for (std::size_t j = i + 1; j < geom.positions.size(); ++j)
        if (geom.positions[j] - geom.positions[i] == e.filler_lag)
          e.candidate_pairs.push_back({geom.positions[i], geom.positions[j]});
    if (e.candidate_pairs.empty())
      throw std::invalid_argument("plan filler lag " + std::to_string(e.filler_lag) +
                                  " is not generated by this geometry");
    int best_overlap = -1;
    for (const auto& pr : e.candidate_pairs) {
      const int overlap = static_cast<int>(chosen.count(pr.first) + chosen.count(pr.second));
      if (overlap > best_overlap) {
        best_overlap = overlap;
        e.chosen_pair = pr;
      }
    }
    chosen.insert(e.chosen_pair.first);
    chosen.insert(e.chosen_pair.second);
  }
  sel.sensors.assign(chosen.begin(), chosen.end());
  return sel;
}

/// Union of the per-frequency scaled lag sets, compared as exact rationals,
/// with the generating (frequency, pair) list per lag.
struct CombinedCoarray {
  struct Provenance {
    int freq_index;
    int pos_a, pos_b;  // physical positions, lag = ratio * (pos_a - pos_b)
  };
  std::vector<Rational> lags;  // sorted unique
  std::map<Rational, std::vector<Provenance>> provenance;

  int unique_count() const { return static_cast<int>(lags.size()); }
  int positive_count() const {
    int c = 0;
    for (const auto& l : lags) c += l > Rational(0);
    return c;
  }
};

inline CombinedCoarray combined_coarray(const std::vector<ArrayGeometry>& geoms,
                                        const std::vector<Rational>& ratios) {
  if (geoms.size() != ratios.size())
    throw std::invalid_argument("combined_coarray: one geometry per ratio");
  CombinedCoarray cc;
  for (std::size_t q = 0; q < ratios.size(); ++q) {
    if (ratios[q] <= Rational(0)) throw std::invalid_argument("combined_coarray: ratios must be > 0");
    for (int a : geoms[q].positions)
      for (int b : geoms[q].positions)
        cc.provenance[ratios[q] * Rational(a - b)].push_back(
            {static_cast<int>(q), a, b});
  }
  for (const auto& [lag, _] : cc.provenance) cc.lags.push_back(lag);
  return cc;
}

inline CombinedCoarray combined_coarray(const ArrayGeometry& geom,
                                        const std::vector<Rational>& ratios) {
  return combined_coarray(std::vector<ArrayGeometry>(ratios.size(), geom), ratios);
}

struct VirtualCovariance {
  std::vector<int> positions;  // 0 .. L_v
  MatrixC values;              // (L_v+1) x (L_v+1)
};

struct VirtualCovarianceOptions {
  int extent = -1;               // L_v; -1 = largest contiguous fillable prefix
  bool zero_fill_missing = false;  // single-frequency baseline behavior
};

/// Arrange per-frequency normalized covariance entries onto the lag support
/// of a virtual filled ULA at the reference frequency. Entries whose scaled
/// support matches an integer lag are averaged per lag (the map is
/// many-to-one); the result is Toeplitz and Hermitian.
inline VirtualCovariance virtual_covariance(const std::vector<CovarianceMatrix>& rbar,
                                            const std::vector<ArrayGeometry>& geoms,
                                            const std::vector<Rational>& ratios,
                                            const VirtualCovarianceOptions& opt = {}) {
  if (rbar.size() != geoms.size() || rbar.size() != ratios.size() || rbar.empty())
    throw std::invalid_argument("virtual_covariance: need matched covariances/geometries/ratios");
  for (std::size_t q = 0; q < rbar.size(); ++q)
    if (rbar[q].dim() != geoms[q].size())
      throw std::invalid_argument("virtual_covariance: covariance/geometry size mismatch");

  // per integer lag: averaged value over every (q, p, r) whose scaled support
  // equals the lag
  std::map<int, cd> sum;
  std::map<int, int> cnt;
  for (std::size_t q = 0; q < rbar.size(); ++q) {
    const auto& pos = geoms[q].positions;
    for (std::size_t p = 0; p < pos.size(); ++p)
      for (std::size_t r = 0; r < pos.size(); ++r) {
        const Rational lag = ratios[q] * Rational(pos[p] - pos[r]);
        if (!lag.is_integer()) continue;
        sum[static_cast<int>(lag.num())] += rbar[q].values(p, r);
        ++cnt[static_cast<int>(lag.num())];
      }
  }

  int extent = opt.extent;
  if (extent < 0) {
    extent = 0;
    while (cnt.count(extent + 1) && cnt.count(-(extent + 1))) ++extent;
  }

  VirtualCovariance vc;
  vc.positions.resize(extent + 1);
  std::iota(vc.positions.begin(), vc.positions.end(), 0);
  vc.values.resize(extent + 1, extent + 1);
  for (int i = 0; i <= extent; ++i)
    for (int j = 0; j <= extent; ++j) {
      const int lag = i - j;
      const auto it = cnt.find(lag);
      if (it == cnt.end()) {
        if (!opt.zero_fill_missing)
          throw std::runtime_error("virtual lag " + std::to_string(lag) +
                                   " has no supporting entry at any operating frequency");
        vc.values(i, j) = 0.0;
      } else {
        vc.values(i, j) = sum[lag] / static_cast<double>(it->second);
      }
    }
  vc.values = ((vc.values + vc.values.adjoint()) * 0.5).eval();
  return vc;
}

namespace detail {

inline void normalized_per_frequency(const std::vector<SnapshotMatrix>& snaps,
                                     std::vector<CovarianceMatrix>& rbar,
                                     std::vector<ArrayGeometry>& geoms,
                                     std::vector<Rational>& ratios) {
  if (snaps.empty()) throw std::invalid_argument("need at least one frequency of snapshots");
  for (const auto& x : snaps) {
    rbar.push_back(normalized_covariance(sample_covariance(x), x.sensors()));
    geoms.push_back(ArrayGeometry(x.positions, x.unit_spacing_d0));
    ratios.push_back(x.alpha);
  }
}

}  // namespace detail

/// Normalized covariances -> virtual filled-ULA covariance -> MUSIC. Exact
/// only under proportional source spectra.
inline SpatialSpectrum multifreq_music_doa(const std::vector<SnapshotMatrix>& snaps, int D,
                                           const Grid& grid,
                                           const VirtualCovarianceOptions& opt = {}) {
  std::vector<CovarianceMatrix> rbar;
  std::vector<ArrayGeometry> geoms;
  std::vector<Rational> ratios;
  detail::normalized_per_frequency(snaps, rbar, geoms, ratios);
  const VirtualCovariance vc = virtual_covariance(rbar, geoms, ratios, opt);
  return music_spectrum(vc.values, vc.positions, snaps[0].unit_spacing_d0, D, grid);
}

/// Root-MUSIC variant on the same virtual covariance.
inline DoaEstimate multifreq_root_music_doa(const std::vector<SnapshotMatrix>& snaps, int D,
                                            const VirtualCovarianceOptions& opt = {}) {
  std::vector<CovarianceMatrix> rbar;
  std::vector<ArrayGeometry> geoms;
  std::vector<Rational> ratios;
  detail::normalized_per_frequency(snaps, rbar, geoms, ratios);
  const VirtualCovariance vc = virtual_covariance(rbar, geoms, ratios, opt);
  return root_music(vc.values, D, snaps[0].unit_spacing_d0);
}

enum class MultifreqSparseMode { proportional_single_vector, group };

struct MultifreqSparseResult {
  SpatialSpectrum spectrum;             // recovered powers (group mode: mean over frequencies)
  Eigen::MatrixXd per_frequency;        // K x Q (group mode only)
  bool converged = true;
};

/// Sparse multi-frequency recovery on the combined (proportional, single
/// stacked vector) or per-frequency (group) coarray observations. One
/// unpenalized nonnegative noise unknown per frequency in both modes.
inline MultifreqSparseResult multifreq_sparse_doa(const std::vector<SnapshotMatrix>& snaps,
                                                  MultifreqSparseMode mode, double regularization,
                                                  const Grid& grid, const LassoOptions& opt = {}) {
  std::vector<CovarianceMatrix> rbar;
  std::vector<ArrayGeometry> geoms;
  std::vector<Rational> ratios;
  detail::normalized_per_frequency(snaps, rbar, geoms, ratios);
  const Eigen::Index Q = static_cast<Eigen::Index>(snaps.size());
  const Eigen::Index K = grid.size();
  const double d0 = snaps[0].unit_spacing_d0;

  auto steering_at = [&](double ratio_lag, int k) {
    return std::polar(1.0, 2.0 * std::numbers::pi * d0 * ratio_lag *
                               std::sin(deg2rad(grid.angles_deg[k])));
  };

  MultifreqSparseResult out;
  if (mode == MultifreqSparseMode::proportional_single_vector) {
    // average every covariance entry onto its exact rational lag
    std::map<Rational, cd> sum;
    std::map<Rational, int> cnt;
    std::map<Rational, Eigen::VectorXd> noise_cnt;  // per-frequency diagonal hits
    for (Eigen::Index q = 0; q < Q; ++q) {
      const auto& pos = geoms[q].positions;
      for (std::size_t p = 0; p < pos.size(); ++p)
        for (std::size_t r = 0; r < pos.size(); ++r) {
          const Rational lag = ratios[q] * Rational(pos[p] - pos[r]);
          sum[lag] += rbar[q].values(p, r);
          ++cnt[lag];
          if (p == r) {
            auto [it, fresh] = noise_cnt.try_emplace(lag, Eigen::VectorXd::Zero(Q));
            it->second(q) += 1.0;
          }
        }
    }
    const Eigen::Index m = static_cast<Eigen::Index>(sum.size());
    LassoProblem prob;
    prob.dictionary.resize(m, K);
    prob.observation.resize(m);
    prob.lambda = regularization;
    MatrixC noise_cols = MatrixC::Zero(m, Q);
    Eigen::Index row = 0;
    for (const auto& [lag, s] : sum) {
      const int n = cnt[lag];
      prob.observation(row) = s / static_cast<double>(n);
      for (int k = 0; k < K; ++k) prob.dictionary(row, k) = steering_at(lag.to_double(), k);
      const auto it = noise_cnt.find(lag);
      if (it != noise_cnt.end())
        noise_cols.row(row) = (it->second / static_cast<double>(n)).transpose().cast<cd>();
      ++row;
    }
    const auto res = nonneg_lasso(prob, &noise_cols, opt);
    out.converged = res.converged;
    out.spectrum.angles_deg = grid.angles_deg;
    out.spectrum.values.assign(res.solution.data(), res.solution.data() + K);
  } else {
    std::vector<GroupLassoBlock> blocks(Q);
    for (Eigen::Index q = 0; q < Q; ++q) {
      // per-frequency observation averaged per lag of its own coarray
      std::map<Rational, cd> sum;
      std::map<Rational, int> cnt;
      const auto& pos = geoms[q].positions;
      for (std::size_t p = 0; p < pos.size(); ++p)
        for (std::size_t r = 0; r < pos.size(); ++r) {
          const Rational lag = ratios[q] * Rational(pos[p] - pos[r]);
          sum[lag] += rbar[q].values(p, r);
          ++cnt[lag];
        }
      const Eigen::Index m = static_cast<Eigen::Index>(sum.size());
      blocks[q].dictionary.resize(m, K);
      blocks[q].observation.resize(m);
      blocks[q].noise_column = VectorC::Zero(m);
      Eigen::Index row = 0;
      for (const auto& [lag, s] : sum) {
        blocks[q].observation(row) = s / static_cast<double>(cnt[lag]);
        for (int k = 0; k < K; ++k) blocks[q].dictionary(row, k) = steering_at(lag.to_double(), k);
        if (lag == Rational(0)) blocks[q].noise_column(row) = 1.0;
        ++row;
      }
    }
    const auto res = group_lasso(blocks, regularization, opt);
    out.converged = res.converged;
    out.per_frequency = res.solutions;
    out.spectrum.angles_deg = grid.angles_deg;
    out.spectrum.values.resize(K);
    for (Eigen::Index k = 0; k < K; ++k) out.spectrum.values[k] = res.solutions.row(k).mean();
  }
  return out;
}

/// Resolvability bounds of the sparse single-vector technique: a single
/// frequency supports (3MN+M-N-1)/2 sources; Q frequencies are bounded by
/// Q (3MN+M-N-1)/2 - (Q-1) because the zero lag always overlaps.
struct MultifreqResolvability {
  int single_frequency_max;
  int combined_upper_bound;
};

inline MultifreqResolvability multifreq_resolvable_bounds(int M, int N, int Q) {
  require_coprime(M, N);
  if (Q < 1) throw std::invalid_argument("Q must be >= 1");
  MultifreqResolvability b;
  b.single_frequency_max = (3 * M * N + M - N - 1) / 2;
  b.combined_upper_bound = Q * b.single_frequency_max - (Q - 1);
  return b;
}

}  // namespace doalab
