#pragma once

#include <Eigen/Dense>
#include <fstream>
#include <iomanip>
#include <set>
#include <stdexcept>

#include "doalab/solvers/cmaes.hpp"
#include "doalab/solvers/lasso.hpp"
#include "doalab/subspace.hpp"

namespace doalab {

enum class CouplingParam { full, distance_indexed };

/// Mutual coupling description: a symmetric unit-diagonal normalized mutual
/// impedance matrix Z (the -Z_ij/Z_L terms folded into the off-diagonals) and
/// its inverse C, the coupling matrix applied to the array manifold.
class CouplingModel {
 public:
  CouplingModel() = default;
  CouplingModel(MatrixC z, CouplingParam param, std::vector<int> separations = {})
      : z_(std::move(z)), parameterization_(param), separations_(std::move(separations)) {
    if (z_.rows() != z_.cols()) throw std::invalid_argument("CouplingModel: Z must be square");
    if ((z_ - z_.transpose()).norm() > 1e-10 * std::max(1.0, z_.norm()))
      throw std::invalid_argument("CouplingModel: Z must be symmetric (reciprocity)");
    for (Eigen::Index i = 0; i < z_.rows(); ++i)
      if (std::abs(z_(i, i) - cd(1, 0)) > 1e-12)
        throw std::invalid_argument("CouplingModel: Z diagonal must be 1");
    Eigen::FullPivLU<MatrixC> lu(z_);
    if (!lu.isInvertible()) throw std::runtime_error("CouplingModel: Z is singular");
    c_ = lu.inverse();
  }

  const MatrixC& impedance() const { return z_; }
  const MatrixC& coupling() const { return c_; }
  CouplingParam parameterization() const { return parameterization_; }
  const std::vector<int>& separations() const { return separations_; }
  int dim() const { return static_cast<int>(z_.rows()); }

  double inverse_residual() const { return (c_ * z_ - MatrixC::Identity(dim(), dim())).norm(); }

  /// CSV of (row, col, re, im) for Z.
  void write_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os << "row,col,re,im\n" << std::setprecision(12);
    for (Eigen::Index i = 0; i < z_.rows(); ++i)
      for (Eigen::Index j = 0; j < z_.cols(); ++j)
        os << i << "," << j << "," << z_(i, j).real() << "," << z_(i, j).imag() << "\n";
  }

  static CouplingModel read_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::string line;
    std::getline(is, line);  // header
    std::vector<std::tuple<int, int, double, double>> rows;
    int n = 0;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::string tok;
      int vals_i[2];
      double vals_d[2];
      for (int f = 0; f < 2; ++f) {
        std::getline(ls, tok, ',');
        vals_i[f] = std::stoi(tok);
      }
      for (int f = 0; f < 2; ++f) {
        std::getline(ls, tok, ',');
        vals_d[f] = std::stod(tok);
      }
      rows.push_back({vals_i[0], vals_i[1], vals_d[0], vals_d[1]});
      n = std::max(n, std::max(vals_i[0], vals_i[1]) + 1);
    }
    MatrixC z = MatrixC::Zero(n, n);
    for (const auto& [i, j, re, im] : rows) z(i, j) = cd(re, im);
    return CouplingModel(std::move(z), CouplingParam::full);
  }

 private:
  MatrixC z_;
  MatrixC c_;
  CouplingParam parameterization_ = CouplingParam::full;
  std::vector<int> separations_;
};

inline std::vector<int> unique_separations(const ArrayGeometry& geom) {
  std::set<int> seps;
  for (std::size_t i = 0; i < geom.positions.size(); ++i)
    for (std::size_t j = i + 1; j < geom.positions.size(); ++j)
      seps.insert(geom.positions[j] - geom.positions[i]);
  return {seps.begin(), seps.end()};
}

/// Synthetic distance-indexed coupling: off-diagonal Z term for separation
/// delta (in d0 units) is c1 * delta^(-gamma). Stands in for measured
/// electromagnetic coupling; magnitudes decay monotonically with separation.
inline CouplingModel synth_coupling(const ArrayGeometry& geom, cd c1, double gamma) {
  if (std::abs(c1) >= 1.0) throw std::invalid_argument("synth_coupling: need |c1| < 1");
  if (!(gamma > 0.0)) throw std::invalid_argument("synth_coupling: need gamma > 0");
  const int n = geom.size();
  MatrixC z = MatrixC::Identity(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double delta = std::abs(geom.positions[i] - geom.positions[j]);
      z(i, j) = c1 * std::pow(delta, -gamma);
    }
  return CouplingModel(std::move(z), CouplingParam::distance_indexed, unique_separations(geom));
}

/// Build a distance-indexed Z from one complex value per unique separation.
inline MatrixC impedance_from_separation_values(const ArrayGeometry& geom,
                                                const std::vector<int>& separations,
                                                const VectorC& values) {
  if (static_cast<Eigen::Index>(separations.size()) != values.size())
    throw std::invalid_argument("impedance_from_separation_values: size mismatch");
  const int n = geom.size();
  MatrixC z = MatrixC::Identity(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const int sep = std::abs(geom.positions[i] - geom.positions[j]);
      const auto it = std::lower_bound(separations.begin(), separations.end(), sep);
      if (it == separations.end() || *it != sep)
        throw std::invalid_argument("impedance_from_separation_values: missing separation " +
                                    std::to_string(sep));
      z(i, j) = values(static_cast<Eigen::Index>(it - separations.begin()));
    }
  return z;
}

/// Receiving-mutual-impedance estimation from coupled/uncoupled voltage pairs
/// under R plane-wave excitations (columns of the inputs). Solves one least
/// squares system per element for its off-diagonal impedance row.
inline MatrixC rmim_estimate(const MatrixC& coupled, const MatrixC& uncoupled) {
  const Eigen::Index n = coupled.rows();
  const Eigen::Index r = coupled.cols();
  if (uncoupled.rows() != n || uncoupled.cols() != r)
    throw std::invalid_argument("rmim_estimate: voltage matrices must match");
  if (r < n - 1)
    throw std::invalid_argument("rmim_estimate: needs at least N_A - 1 plane waves, got " +
                                std::to_string(r));
  MatrixC z = MatrixC::Identity(n, n);
  for (Eigen::Index m = 0; m < n; ++m) {
    MatrixC a(r, n - 1);
    Eigen::Index col = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == m) continue;
      a.col(col++) = coupled.row(j).transpose();
    }
    const VectorC b = (uncoupled.row(m) - coupled.row(m)).transpose();
    Eigen::JacobiSVD<MatrixC> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double cond = svd.singularValues()(0) / svd.singularValues()(svd.singularValues().size() - 1);
    if (!(cond < 1e12))
      throw std::runtime_error("rmim_estimate: rank-deficient excitation set, condition number " +
                               std::to_string(cond));
    const VectorC x = svd.solve(b);
    col = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == m) continue;
      z(m, j) = x(col++);
    }
  }
  return z;
}

/// Coupled/uncoupled plane-wave voltage pair for a geometry and model:
/// uncoupled column r is the steering vector of the r-th excitation, coupled
/// is C times it.
inline std::pair<MatrixC, MatrixC> rmim_excitations(const ArrayGeometry& geom,
                                                    const CouplingModel& model,
                                                    const std::vector<double>& angles_deg) {
  MatrixC w(geom.size(), static_cast<Eigen::Index>(angles_deg.size()));
  for (std::size_t r = 0; r < angles_deg.size(); ++r)
    w.col(static_cast<Eigen::Index>(r)) = steering_vector(geom, 1.0, angles_deg[r]);
  return {model.coupling() * w, w};
}

inline std::vector<double> uniform_plane_waves(int count, double lo_deg = -74.0,
                                               double hi_deg = 76.0) {
  std::vector<double> a(count);
  for (int r = 0; r < count; ++r) a[r] = lo_deg + (hi_deg - lo_deg) * r / (count - 1);
  return a;
}

struct IterativeCompensationResult {
  SpatialSpectrum spectrum;
  VectorC delta_z;  // per unique separation
  double noise_power = 0.0;
  std::vector<double> objective_history;  // one entry per outer iteration
  bool solver_converged = true;
};

struct IterativeCompensationOptions {
  double lambda = 0.25;
  int iterations = 20;
  double stagnation_rtol = 1e-6;
  double delta_bound = 0.3;  // box half width on re/im of each unique entry
  int cmaes_population = 0;  // 0 = default
  int cmaes_generations = 60;
  std::uint64_t seed = 1;
  LassoOptions solver;
};

/// Alternating compensation: the inner convex step recovers grid powers and
/// noise by nonnegative Lasso for the current impedance perturbation; the
/// outer step updates the distance-indexed perturbation by CMA-ES holding the
/// recovered powers fixed.
inline IterativeCompensationResult iterative_compensation(const CovarianceMatrix& rxx,
                                                          const ArrayGeometry& geom,
                                                          const CouplingModel& z_model,
                                                          const Grid& grid,
                                                          const IterativeCompensationOptions& opt = {}) {
  const int n = geom.size();
  if (rxx.dim() != n) throw std::invalid_argument("iterative_compensation: dimension mismatch");
  const auto seps = unique_separations(geom);
  const int ns = static_cast<int>(seps.size());
  const int K = grid.size();

  VectorC rvec(n * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) rvec(j * n + i) = rxx.values(i, j);

  const MatrixC a_grid = manifold(geom.positions, geom.unit_spacing_d0, 1.0, grid.angles_deg);
  VectorC ivec = VectorC::Zero(n * n);
  for (int i = 0; i < n; ++i) ivec(i * n + i) = 1.0;

  auto dictionary_for = [&](const MatrixC& z_total) {
    const MatrixC ca = z_total.inverse() * a_grid;
    MatrixC dict(n * n, K);
    for (int k = 0; k < K; ++k) {
      const VectorC col = ca.col(k);
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) dict(j * n + i, k) = std::conj(col(j)) * col(i);
    }
    return dict;
  };

  IterativeCompensationResult out;
  VectorC delta = VectorC::Zero(ns);
  Eigen::VectorXd powers = Eigen::VectorXd::Zero(K);
  double noise = 0.0;

  auto z_total_for = [&](const VectorC& dz) {
    // model entries plus perturbation per separation
    MatrixC z = z_model.impedance();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const int sep = std::abs(geom.positions[i] - geom.positions[j]);
        const int idx = static_cast<int>(std::lower_bound(seps.begin(), seps.end(), sep) - seps.begin());
        z(i, j) += dz(idx);
      }
    return z;
  };

  LassoResult inner;
  for (int iter = 0; iter < opt.iterations; ++iter) {
    // inner convex step
    LassoProblem prob;
    prob.dictionary = dictionary_for(z_total_for(delta));
    prob.observation = rvec;
    prob.lambda = opt.lambda;
    inner = nonneg_lasso(prob, ivec, opt.solver);
    powers = inner.solution;
    noise = inner.noise_power;

    out.objective_history.push_back(inner.objective);
    if (iter > 0) {
      const double prev = out.objective_history[out.objective_history.size() - 2];
      if (std::abs(prev - inner.objective) <= opt.stagnation_rtol * std::max(1.0, prev)) break;
    }
    if (iter + 1 == opt.iterations) break;

    // outer perturbation update with the recovered powers held fixed
    std::vector<int> active;
    for (int k = 0; k < K; ++k)
      if (powers(k) > 0.0) active.push_back(k);
    auto objective = [&](const Eigen::VectorXd& x) {
      VectorC dz(ns);
      for (int s = 0; s < ns; ++s) dz(s) = cd(x(2 * s), x(2 * s + 1));
      const MatrixC z = z_total_for(dz);
      Eigen::FullPivLU<MatrixC> lu(z);
      if (!lu.isInvertible()) return 1e30;
      const MatrixC c = lu.inverse();
      MatrixC model = MatrixC::Zero(n, n);
      for (int k : active) {
        const VectorC ca = c * a_grid.col(k);
        model.noalias() += powers(k) * (ca * ca.adjoint());
      }
      model += noise * MatrixC::Identity(n, n);
      return (rxx.values - model).norm();
    };
    CmaesConfig cfg;
    cfg.dimension = 2 * ns;
    cfg.lower = Eigen::VectorXd::Constant(2 * ns, -opt.delta_bound);
    cfg.upper = Eigen::VectorXd::Constant(2 * ns, opt.delta_bound);
    cfg.population_size = opt.cmaes_population;
    cfg.generations = opt.cmaes_generations;
    cfg.seed = opt.seed + iter;
    cfg.initial_step_fraction = 0.15;
    cfg.initial_mean.resize(2 * ns);
    for (int s = 0; s < ns; ++s) {
      cfg.initial_mean(2 * s) = std::clamp(delta(s).real(), -opt.delta_bound, opt.delta_bound);
      cfg.initial_mean(2 * s + 1) = std::clamp(delta(s).imag(), -opt.delta_bound, opt.delta_bound);
    }
    const auto best = cmaes_minimize(objective, cfg);
    Eigen::VectorXd current(2 * ns);
    for (int s = 0; s < ns; ++s) {
      current(2 * s) = delta(s).real();
      current(2 * s + 1) = delta(s).imag();
    }
    if (best.best_value < objective(current))  // keep the incumbent on a failed search
      for (int s = 0; s < ns; ++s) delta(s) = cd(best.best_point(2 * s), best.best_point(2 * s + 1));
  }

  out.spectrum.angles_deg = grid.angles_deg;
  out.spectrum.values.assign(powers.data(), powers.data() + K);
  out.delta_z = delta;
  out.noise_power = noise;
  out.solver_converged = inner.converged;
  return out;
}

struct SimultaneousCompensationOptions {
  double bounds_pct = 0.10;        // search box around the nominal impedance values
  double power_max = 0.0;          // 0 = derive from trace
  std::uint64_t seed = 1;
  int population = 1000;
  int generations = 1000;
  int restarts = 0;
  double target_value = -std::numeric_limits<double>::infinity();
};

struct SimultaneousCompensationResult {
  DoaEstimate doas;
  Eigen::VectorXd powers;  // per estimated source
  double noise_power = 0.0;
  CouplingModel model;
  double objective = 0.0;
  bool budget_exhausted = false;
};

/// Joint grid-DOA / power / coupling / noise fit by mixed-parameter CMA-ES:
/// minimize || R - C A diag(p) A^H C^H - s I ||_F^2 with the D angle slots
/// integer-masked onto the grid and the unique impedance entries boxed within
/// bounds_pct of the nominal model.
inline SimultaneousCompensationResult simultaneous_compensation(
    const CovarianceMatrix& rxx, const ArrayGeometry& geom, int D, const Grid& grid,
    const CouplingModel& nominal, const SimultaneousCompensationOptions& opt = {}) {
  const int n = geom.size();
  if (rxx.dim() != n) throw std::invalid_argument("simultaneous_compensation: dimension mismatch");
  if (D < 1) throw std::invalid_argument("simultaneous_compensation: D must be >= 1");
  const auto seps = unique_separations(geom);
  const int ns = static_cast<int>(seps.size());
  const int K = grid.size();
  const MatrixC a_grid = manifold(geom.positions, geom.unit_spacing_d0, 1.0, grid.angles_deg);

  VectorC nominal_vals(ns);
  for (int s = 0; s < ns; ++s) {
    // representative entry for this separation
    bool found = false;
    for (int i = 0; i < n && !found; ++i)
      for (int j = 0; j < n && !found; ++j)
        if (i != j && std::abs(geom.positions[i] - geom.positions[j]) == seps[s]) {
          nominal_vals(s) = nominal.impedance()(i, j);
          found = true;
        }
  }

  // unknown layout: D grid indices | D powers | (re, im) per separation | noise
  const int dim = 2 * D + 2 * ns + 1;
  const double trace = rxx.values.trace().real();
  const double pmax = opt.power_max > 0.0 ? opt.power_max : 2.0 * trace / n;
  const double mean_mag = nominal_vals.cwiseAbs().mean();

  CmaesConfig cfg;
  cfg.dimension = dim;
  cfg.lower.resize(dim);
  cfg.upper.resize(dim);
  cfg.integer_mask.assign(dim, false);
  for (int d = 0; d < D; ++d) {
    cfg.lower(d) = 0;
    cfg.upper(d) = K - 1;
    cfg.integer_mask[d] = true;
    cfg.lower(D + d) = 0.0;
    cfg.upper(D + d) = pmax;
  }
  for (int s = 0; s < ns; ++s) {
    const double half =
        std::max(opt.bounds_pct * std::max(std::abs(nominal_vals(s)), 0.1 * mean_mag), 1e-9);
    cfg.lower(2 * D + 2 * s) = nominal_vals(s).real() - half;
    cfg.upper(2 * D + 2 * s) = nominal_vals(s).real() + half;
    cfg.lower(2 * D + 2 * s + 1) = nominal_vals(s).imag() - half;
    cfg.upper(2 * D + 2 * s + 1) = nominal_vals(s).imag() + half;
  }
  cfg.lower(dim - 1) = 0.0;
  cfg.upper(dim - 1) = trace / n;
  cfg.population_size = opt.population;
  cfg.generations = opt.generations;
  cfg.restarts = opt.restarts;
  cfg.seed = opt.seed;
  cfg.target_value = opt.target_value;
  // spread the angle slots across the grid so they do not all start on the
  // same source
  cfg.initial_mean.resize(dim);
  for (int d = 0; d < D; ++d) {
    cfg.initial_mean(d) = (d + 0.5) * (K - 1) / D;
    cfg.initial_mean(D + d) = 0.5 * pmax;
  }
  for (int s = 0; s < ns; ++s) {
    cfg.initial_mean(2 * D + 2 * s) = nominal_vals(s).real();
    cfg.initial_mean(2 * D + 2 * s + 1) = nominal_vals(s).imag();
  }
  cfg.initial_mean(dim - 1) = 0.5 * trace / n;

  auto objective = [&](const Eigen::VectorXd& x) {
    VectorC vals(ns);
    for (int s = 0; s < ns; ++s) vals(s) = cd(x(2 * D + 2 * s), x(2 * D + 2 * s + 1));
    MatrixC z;
    try {
      z = impedance_from_separation_values(geom, seps, vals);
    } catch (const std::exception&) {
      return 1e30;
    }
    Eigen::FullPivLU<MatrixC> lu(z);
    if (!lu.isInvertible()) return 1e30;
    const MatrixC c = lu.inverse();
    MatrixC model = MatrixC::Zero(n, n);
    for (int d = 0; d < D; ++d) {
      const int k = static_cast<int>(x(d));
      const VectorC ca = c * a_grid.col(k);
      model.noalias() += x(D + d) * (ca * ca.adjoint());
    }
    model += x(dim - 1) * MatrixC::Identity(n, n);
    return (rxx.values - model).squaredNorm();
  };

  const auto best = cmaes_minimize(objective, cfg);

  SimultaneousCompensationResult out;
  std::vector<std::pair<double, double>> found;  // (angle, power)
  for (int d = 0; d < D; ++d)
    found.push_back({grid.angles_deg[static_cast<int>(best.best_point(d))], best.best_point(D + d)});
  std::sort(found.begin(), found.end());
  out.powers.resize(D);
  for (int d = 0; d < D; ++d) {
    out.doas.angles_deg.push_back(found[d].first);
    out.powers(d) = found[d].second;
  }
  out.noise_power = best.best_point(dim - 1);
  VectorC vals(ns);
  for (int s = 0; s < ns; ++s)
    vals(s) = cd(best.best_point(2 * D + 2 * s), best.best_point(2 * D + 2 * s + 1));
  out.model = CouplingModel(impedance_from_separation_values(geom, seps, vals),
                            CouplingParam::distance_indexed, seps);
  out.objective = best.best_value;
  out.budget_exhausted = best.best_value > opt.target_value &&
                         opt.target_value > -std::numeric_limits<double>::infinity();
  return out;
}

}  // namespace doalab
