#pragma once

#include <stdexcept>

#include "doalab/solvers/lasso.hpp"
#include "doalab/subspace.hpp"

namespace doalab {

struct InterpolateOptions {
  double lambda = 0.25;
  bool allow_extrapolation = false;      // synthesizing beyond the physical coarray
  double extrapolation_cap_factor = 2.0; // L_full <= cap * physical extent
  LassoOptions solver;
};

struct InterpolateResult {
  CoarrayObservation combined;  // contiguous [-L_full, L_full]
  Eigen::VectorXd powers;       // sparse solution over the grid
  double noise_power = 0.0;
  bool solver_converged = true;
};

/// Fill (or extend) the coarray observation: sparse-recover grid powers from
/// the measured lags, synthesize the fully populated coarray from them, and
/// keep the measured values wherever a physical lag exists.
inline InterpolateResult interpolate_coarray(const CoarrayObservation& zu, int l_full,
                                             const Grid& grid, const InterpolateOptions& opt = {}) {
  if (zu.size() < 1 || zu.noise_lag_index < 0)
    throw std::invalid_argument("interpolate_coarray: need an observation containing lag 0");
  int contiguous = 0;
  {
    std::set<int> have(zu.lags.begin(), zu.lags.end());
    while (have.count(contiguous + 1) && have.count(-(contiguous + 1))) ++contiguous;
  }
  const int max_physical = std::max(std::abs(zu.lags.front()), std::abs(zu.lags.back()));
  if (l_full < contiguous)
    throw std::invalid_argument("interpolate_coarray: L_full below the existing contiguous extent");
  if (l_full > max_physical && !opt.allow_extrapolation)
    throw std::invalid_argument("interpolate_coarray: L_full beyond the physical coarray needs "
                                "allow_extrapolation");
  if (l_full > opt.extrapolation_cap_factor * max_physical)
    throw std::invalid_argument("interpolate_coarray: L_full exceeds the extrapolation cap");
  if (!(opt.lambda > 0.0)) throw std::invalid_argument("interpolate_coarray: lambda must be > 0");

  const int K = grid.size();
  LassoProblem prob;
  prob.dictionary.resize(zu.size(), K);
  for (int i = 0; i < zu.size(); ++i)
    for (int k = 0; k < K; ++k)
      prob.dictionary(i, k) = std::polar(
          1.0, 2.0 * std::numbers::pi * zu.unit_spacing_d0 * zu.lags[i] *
                   std::sin(deg2rad(grid.angles_deg[k])));
  prob.observation = zu.z;
  prob.lambda = opt.lambda;
  VectorC noise_col = VectorC::Zero(zu.size());
  noise_col(zu.noise_lag_index) = 1.0;
  const auto sol = nonneg_lasso(prob, noise_col, opt.solver);

  InterpolateResult res;
  res.powers = sol.solution;
  res.noise_power = sol.noise_power;
  res.solver_converged = sol.converged;

  std::map<int, std::pair<cd, bool>> measured;  // lag -> (value, present)
  for (int i = 0; i < zu.size(); ++i) measured[zu.lags[i]] = {zu.z(i), true};

  auto& out = res.combined;
  out.unit_spacing_d0 = zu.unit_spacing_d0;
  out.z.resize(2 * l_full + 1);
  out.synthesized.resize(2 * l_full + 1);
  for (int lag = -l_full; lag <= l_full; ++lag) {
    const int i = lag + l_full;
    out.lags.push_back(lag);
    const auto it = measured.find(lag);
    if (it != measured.end()) {
      out.z(i) = it->second.first;  // measured values are retained exactly
      out.synthesized[i] = false;
    } else {
      cd v = 0;
      for (int k = 0; k < K; ++k)
        if (sol.solution(k) > 0.0)
          v += sol.solution(k) *
               std::polar(1.0, 2.0 * std::numbers::pi * zu.unit_spacing_d0 * lag *
                                   std::sin(deg2rad(grid.angles_deg[k])));
      out.z(i) = v;
      out.synthesized[i] = true;
    }
    if (lag == 0) out.noise_lag_index = i;
  }
  return res;
}

/// Full pipeline: covariance -> lag observation -> interpolation -> spatially
/// smoothed MUSIC on the combined contiguous vector.
inline SpatialSpectrum interpolated_music_doa(const SnapshotMatrix& x, const ArrayGeometry& geom,
                                              int l_full, int D, const Grid& grid,
                                              const InterpolateOptions& opt = {}) {
  const auto obs = vectorize_to_coarray(sample_covariance(x), geom);
  const auto interp = interpolate_coarray(obs, l_full, grid, opt);
  return spatial_smoothing_music(interp.combined, D, grid);
}

}  // namespace doalab
