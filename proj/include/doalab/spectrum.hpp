#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <stdexcept>
#include <string>
#include <vector>

#include "doalab/simulate.hpp"

namespace doalab {

/// Search grid over angles. Stored in degrees; u-space grids keep uniform
/// spacing in sin(theta) and carry the mapped angles.
struct Grid {
  std::vector<double> angles_deg;
  bool u_spaced = false;

  static Grid theta(double lo_deg = -90.0, double hi_deg = 90.0, double step_deg = 1.0) {
    if (!(step_deg > 0.0) || !(hi_deg > lo_deg)) throw std::invalid_argument("Grid::theta: bad range");
    Grid g;
    const int n = static_cast<int>(std::llround((hi_deg - lo_deg) / step_deg)) + 1;
    g.angles_deg.reserve(n);
    for (int i = 0; i < n; ++i) g.angles_deg.push_back(lo_deg + i * step_deg);
    return g;
  }

  static Grid u(double lo = -1.0, double hi = 1.0, int points = 181) {
    if (points < 2 || !(hi > lo) || lo < -1.0 || hi > 1.0)
      throw std::invalid_argument("Grid::u: bad range");
    Grid g;
    g.u_spaced = true;
    g.angles_deg.reserve(points);
    for (int i = 0; i < points; ++i) {
      const double u = lo + (hi - lo) * i / (points - 1);
      g.angles_deg.push_back(rad2deg(std::asin(std::clamp(u, -1.0, 1.0))));
    }
    return g;
  }

  int size() const { return static_cast<int>(angles_deg.size()); }
};

inline Grid default_grid() { return Grid::theta(-90.0, 90.0, 1.0); }

/// Grid-aligned nonnegative power spectrum.
struct SpatialSpectrum {
  std::vector<double> angles_deg;
  std::vector<double> values;

  int size() const { return static_cast<int>(angles_deg.size()); }

  /// Two-column CSV with 12 significant digits.
  void write_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os << "angle_deg,power\n" << std::setprecision(12);
    for (int i = 0; i < size(); ++i) os << angles_deg[i] << "," << values[i] << "\n";
  }
};

/// Extracted direction estimates. `padded` is set when fewer than the
/// requested number of strict local maxima existed and the remainder was
/// filled from the largest leftover values.
struct DoaEstimate {
  std::vector<double> angles_deg;  // sorted ascending
  bool padded = false;
  bool solver_converged = true;
  int discarded_roots = 0;  // root-MUSIC roots mapping outside [-1, 1]
};

/// The D largest strict local maxima (interior points exceeding both
/// neighbors). Ties break toward the lower angle.
inline DoaEstimate find_peaks(const SpatialSpectrum& spec, int D) {
  if (D < 1) throw std::invalid_argument("find_peaks: D must be >= 1");
  const int n = spec.size();
  std::vector<int> peaks;
  for (int i = 1; i + 1 < n; ++i)
    if (spec.values[i] > spec.values[i - 1] && spec.values[i] > spec.values[i + 1])
      peaks.push_back(i);
  auto by_height_then_angle = [&](int a, int b) {
    if (spec.values[a] != spec.values[b]) return spec.values[a] > spec.values[b];
    return a < b;
  };
  std::sort(peaks.begin(), peaks.end(), by_height_then_angle);

  DoaEstimate est;
  for (int i = 0; i < std::min<int>(D, peaks.size()); ++i)
    est.angles_deg.push_back(spec.angles_deg[peaks[i]]);

  if (static_cast<int>(est.angles_deg.size()) < D) {
    est.padded = true;
    std::vector<int> rest;
    for (int i = 0; i < n; ++i)
      if (std::find(peaks.begin(), peaks.end(), i) == peaks.end()) rest.push_back(i);
    std::sort(rest.begin(), rest.end(), by_height_then_angle);
    for (int i = 0; static_cast<int>(est.angles_deg.size()) < D && i < static_cast<int>(rest.size()); ++i)
      est.angles_deg.push_back(spec.angles_deg[rest[i]]);
  }
  std::sort(est.angles_deg.begin(), est.angles_deg.end());
  return est;
}

}  // namespace doalab
