#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "doalab/active.hpp"
#include "doalab/coupling.hpp"
#include "doalab/interpolate.hpp"
#include "doalab/multifreq.hpp"
#include "doalab/solvers/l1svd.hpp"

namespace doalab {

/// Flat key=value experiment description with repeated-key lists. Lines
/// starting with '#' are comments; whitespace around keys and values is
/// ignored. Values keep their raw text; typed accessors parse on demand.
class ExperimentConfig {
 public:
  static ExperimentConfig parse(std::istream& is) {
    ExperimentConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        if (line.find_first_not_of(" \t\r") != std::string::npos)
          throw std::invalid_argument("config line " + std::to_string(lineno) +
                                      ": expected key = value");
        continue;
      }
      cfg.values_.emplace(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
  }

  static ExperimentConfig parse_string(const std::string& text) {
    std::istringstream is(text);
    return parse(is);
  }

  static ExperimentConfig parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("cannot open config file " + path);
    return parse(is);
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get(const std::string& key, const std::string& fallback = {}) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  std::string require(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw std::invalid_argument("config: missing required key '" + key + "'");
    return it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : std::stod(it->second);
  }

  long get_int(const std::string& key, long fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : std::stol(it->second);
  }

  std::vector<double> get_list(const std::string& key) const {
    std::vector<double> out;
    const auto it = values_.find(key);
    if (it == values_.end()) return out;
    std::istringstream ls(it->second);
    std::string tok;
    while (std::getline(ls, tok, ',')) out.push_back(std::stod(trim(tok)));
    return out;
  }

  std::vector<Rational> get_rationals(const std::string& key) const {
    std::vector<Rational> out;
    const auto it = values_.find(key);
    if (it == values_.end()) return out;
    std::istringstream ls(it->second);
    std::string tok;
    while (std::getline(ls, tok, ',')) {
      const std::string t = trim(tok);
      const auto slash = t.find('/');
      if (slash == std::string::npos)
        out.push_back(Rational(std::stoll(t)));
      else
        out.push_back(Rational(std::stoll(t.substr(0, slash)), std::stoll(t.substr(slash + 1))));
    }
    return out;
  }

  /// All values of a repeated key, in file order.
  std::vector<std::string> get_all(const std::string& key) const {
    std::vector<std::string> out;
    const auto [lo, hi] = values_.equal_range(key);
    for (auto it = lo; it != hi; ++it) out.push_back(it->second);
    return out;
  }

  void set(const std::string& key, const std::string& value) {
    values_.erase(key);
    values_.emplace(key, value);
  }

 private:
  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

  std::multimap<std::string, std::string> values_;
};

inline ArrayGeometry geometry_from_config(const ExperimentConfig& cfg,
                                          const std::string& prefix = "geometry") {
  if (cfg.has(prefix + ".positions")) return ArrayGeometry::parse(cfg.get(prefix + ".positions"));
  const std::string kind = cfg.require(prefix);
  std::vector<int> params;
  for (double v : cfg.get_list(prefix + ".params")) params.push_back(static_cast<int>(v));
  return build_geometry(geometry_kind_from_string(kind), params, cfg.get_double("d0", 0.5));
}

/// Scene template; the sweep parameter perturbs a copy per point.
struct SceneTemplate {
  std::vector<double> u;        // reduced coordinates (preferred for sweeps)
  std::vector<double> degrees;  // alternative direct specification
  std::vector<double> snr_db;   // per source, broadcast when single
  WaveformKind waveform = WaveformKind::gaussian;
  std::vector<std::vector<int>> coherence_groups;
  std::vector<Rational> frequencies{Rational(1)};
  std::pair<double, double> nonprop_db_range{0.0, 0.0};  // extra frequencies, 0,0 = proportional
};

inline SceneTemplate scene_from_config(const ExperimentConfig& cfg) {
  SceneTemplate t;
  t.u = cfg.get_list("scene.u");
  t.degrees = cfg.get_list("scene.directions_deg");
  if (t.u.empty() && t.degrees.empty())
    throw std::invalid_argument("config: need scene.u or scene.directions_deg");
  t.snr_db = cfg.get_list("scene.snr_db");
  if (t.snr_db.empty()) t.snr_db = {0.0};
  if (cfg.get("scene.waveform") == "bpsk") t.waveform = WaveformKind::bpsk;
  for (const std::string& grp : cfg.get_all("scene.coherent")) {
    std::vector<int> g;
    std::istringstream ls(grp);
    std::string tok;
    while (std::getline(ls, tok, ',')) g.push_back(std::stoi(tok));
    t.coherence_groups.push_back(g);
  }
  if (cfg.has("freq.ratios")) t.frequencies = cfg.get_rationals("freq.ratios");
  const auto np = cfg.get_list("scene.nonprop_db_range");
  if (np.size() == 2) t.nonprop_db_range = {np[0], np[1]};
  return t;
}

enum class SweepParam { none, delta_snr, delta_u, snr_db };

inline SweepParam sweep_param_from_string(const std::string& s) {
  if (s.empty() || s == "none") return SweepParam::none;
  if (s == "delta_snr") return SweepParam::delta_snr;
  if (s == "delta_u") return SweepParam::delta_u;
  if (s == "snr_db") return SweepParam::snr_db;
  throw std::invalid_argument("unknown sweep.param '" + s + "'");
}

/// Scene realized for one sweep point and trial.
inline SourceScene realize_scene(const SceneTemplate& t, SweepParam param, double value,
                                 std::uint64_t trial_seed) {
  std::vector<double> dirs;
  std::vector<double> snr = t.snr_db;
  if (param == SweepParam::delta_u) {
    if (t.u.empty()) throw std::invalid_argument("delta_u sweep needs scene.u");
    dirs = {rad2deg(std::asin(t.u[0])), rad2deg(std::asin(t.u[0] + value))};
    while (snr.size() < 2) snr.push_back(snr.back());
  } else {
    if (!t.u.empty())
      for (double u : t.u) dirs.push_back(rad2deg(std::asin(u)));
    else
      dirs = t.degrees;
    if (param == SweepParam::delta_snr) {
      // first source raised by the sweep value, the rest keep the template
      while (snr.size() < dirs.size()) snr.push_back(snr.back());
      snr[0] = value + (t.snr_db.size() > 1 ? t.snr_db[1] : 0.0);
    } else if (param == SweepParam::snr_db) {
      snr.assign(dirs.size(), value);
    }
  }
  while (snr.size() < dirs.size()) snr.push_back(snr.back());

  SourceScene scene;
  scene.directions_deg = dirs;
  scene.waveform_kind = t.waveform;
  scene.coherence_groups = t.coherence_groups;
  scene.frequencies = t.frequencies;
  const int D = scene.source_count();
  const int Q = static_cast<int>(t.frequencies.size());
  scene.powers.resize(D, Q);
  for (int d = 0; d < D; ++d) scene.powers(d, 0) = std::pow(10.0, snr[d] / 10.0);
  if (t.nonprop_db_range.first == 0.0 && t.nonprop_db_range.second == 0.0) {
    for (int q = 1; q < Q; ++q) scene.powers.col(q) = scene.powers.col(0);
  } else {
    Rng rng(trial_seed ^ 0x6e6f6e70ULL);  // per-trial power draw
    for (int q = 1; q < Q; ++q)
      for (int d = 0; d < D; ++d)
        scene.powers(d, q) =
            std::pow(10.0, rng.uniform(t.nonprop_db_range.first, t.nonprop_db_range.second) / 10.0);
  }
  return scene;
}

/// Everything an estimator invocation needs for one trial.
struct TrialContext {
  const ExperimentConfig* cfg = nullptr;
  ArrayGeometry geometry;
  std::optional<std::pair<ArrayGeometry, ArrayGeometry>> txrx;
  std::optional<CouplingModel> coupling;
  SourceScene scene;
  int snapshots = 0;
  double noise_var = 1.0;
  std::uint64_t seed = 0;
  Grid grid;       // estimator/dictionary grid
  Grid peak_grid;  // subspace peak-search grid
  int model_order = 0;
};

namespace detail {

inline std::vector<SnapshotMatrix> per_frequency_snapshots(const TrialContext& t) {
  std::vector<SnapshotMatrix> snaps;
  const MatrixC* c = t.coupling ? &t.coupling->coupling() : nullptr;
  for (std::size_t q = 0; q < t.scene.frequencies.size(); ++q)
    snaps.push_back(generate_snapshots(t.geometry, t.scene, t.snapshots, t.noise_var,
                                       t.seed + 7919 * q, c, t.scene.frequencies[q]));
  return snaps;
}

inline CoarrayObservation contiguous_observation(const CovarianceMatrix& r,
                                                 const ArrayGeometry& geom) {
  const auto obs = vectorize_to_coarray(r, geom);
  const int extent = difference_coarray(geom).contiguous_half_extent;
  CoarrayObservation zf;
  zf.unit_spacing_d0 = obs.unit_spacing_d0;
  std::vector<cd> vals;
  for (int i = 0; i < obs.size(); ++i)
    if (std::abs(obs.lags[i]) <= extent) {
      zf.lags.push_back(obs.lags[i]);
      vals.push_back(obs.z(i));
      if (obs.lags[i] == 0) zf.noise_lag_index = static_cast<int>(vals.size()) - 1;
    }
  zf.z = Eigen::Map<VectorC>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  return zf;
}

}  // namespace detail

/// One trial of the named estimator. Returns the model_order angle
/// estimates; spectrum_out (when non-null) receives the scanned or recovered
/// spectrum for estimators that produce one.
inline DoaEstimate run_estimator(const std::string& name, const TrialContext& t,
                                 SpatialSpectrum* spectrum_out = nullptr) {
  const int D = t.model_order;
  const double lambda = t.cfg->get_double("estimator.lambda", 0.25);
  auto peaks = [&](SpatialSpectrum spec, int order) {
    const auto est = find_peaks(spec, order);
    if (spectrum_out) *spectrum_out = std::move(spec);
    return est;
  };

  if (name == "das" || name == "music" || name == "root_music") {
    const auto x = detail::per_frequency_snapshots(t)[0];
    const auto r = sample_covariance(x);
    if (name == "das") return peaks(das_spectrum(r, t.geometry, t.peak_grid), D);
    if (name == "music") return peaks(music_spectrum(r, t.geometry, D, t.peak_grid), D);
    return root_music(r, D, t.geometry);
  }
  if (name == "music_ss" || name == "music_aug" || name == "coarray_lasso") {
    const auto x = detail::per_frequency_snapshots(t)[0];
    const auto r = sample_covariance(x);
    if (name == "music_aug") return peaks(augmented_covariance_music(r, t.geometry, D, t.peak_grid), D);
    if (name == "music_ss")
      return peaks(spatial_smoothing_music(detail::contiguous_observation(r, t.geometry), D, t.peak_grid), D);
    // sparse recovery on the unique coarray observations
    const auto obs = vectorize_to_coarray(r, t.geometry);
    LassoProblem prob;
    prob.dictionary.resize(obs.size(), t.grid.size());
    for (int i = 0; i < obs.size(); ++i)
      for (int k = 0; k < t.grid.size(); ++k)
        prob.dictionary(i, k) =
            std::polar(1.0, 2.0 * std::numbers::pi * obs.unit_spacing_d0 * obs.lags[i] *
                                std::sin(deg2rad(t.grid.angles_deg[k])));
    prob.observation = obs.z;
    prob.lambda = lambda;
    VectorC noise_col = VectorC::Zero(obs.size());
    noise_col(obs.noise_lag_index) = 1.0;
    const auto sol = nonneg_lasso(prob, noise_col);
    SpatialSpectrum spec;
    spec.angles_deg = t.grid.angles_deg;
    spec.values.assign(sol.solution.data(), sol.solution.data() + t.grid.size());
    auto est = peaks(std::move(spec), D);
    est.solver_converged = sol.converged;
    return est;
  }
  if (name == "l1_svd") {
    SnapshotMatrix x;
    if (t.txrx)
      x = generate_active_snapshots(t.txrx->first, t.txrx->second, t.scene, t.snapshots,
                                    t.noise_var, t.seed);
    else
      x = detail::per_frequency_snapshots(t)[0];
    return peaks(l1_svd(x, D, t.grid, lambda), D);
  }
  if (name == "mf_music" || name == "mf_root_music" || name == "mf_music_zero_fill") {
    const auto snaps = detail::per_frequency_snapshots(t);
    if (name == "mf_root_music") return multifreq_root_music_doa(snaps, D);
    VirtualCovarianceOptions opt;
    std::vector<SnapshotMatrix> used = snaps;
    if (name == "mf_music_zero_fill") {
      opt.zero_fill_missing = true;
      opt.extent = difference_coarray(t.geometry).max_lag();
      used = {snaps[0]};
    }
    return peaks(multifreq_music_doa(used, D, t.peak_grid, opt), D);
  }
  if (name == "mf_lasso" || name == "mf_group_lasso") {
    const auto snaps = detail::per_frequency_snapshots(t);
    const auto mode = name == "mf_lasso" ? MultifreqSparseMode::proportional_single_vector
                                         : MultifreqSparseMode::group;
    const double reg = name == "mf_group_lasso" ? t.cfg->get_double("estimator.beta", 0.1) : lambda;
    return peaks(multifreq_sparse_doa(snaps, mode, reg, t.grid).spectrum, D);
  }
  if (name == "interp_music" || name == "interp_root_music") {
    const auto x = detail::per_frequency_snapshots(t)[0];
    const auto obs = vectorize_to_coarray(sample_covariance(x), t.geometry);
    InterpolateOptions opt;
    opt.lambda = lambda;
    opt.allow_extrapolation = t.cfg->get_int("estimator.allow_extrapolation", 0) != 0;
    const int l_full = static_cast<int>(
        t.cfg->get_int("estimator.l_full", difference_coarray(t.geometry).max_lag()));
    const auto interp = interpolate_coarray(obs, l_full, t.grid, opt);
    if (name == "interp_root_music")
      return root_music(spatial_smoothing_covariance(interp.combined), D,
                        t.geometry.unit_spacing_d0);
    return peaks(spatial_smoothing_music(interp.combined, D, t.peak_grid), D);
  }
  if (name == "contiguous_root_music") {
    const auto x = detail::per_frequency_snapshots(t)[0];
    const auto zf = detail::contiguous_observation(sample_covariance(x), t.geometry);
    return root_music(spatial_smoothing_covariance(zf), D, t.geometry.unit_spacing_d0);
  }
  if (name == "dcsc_lasso") {
    if (!t.txrx) throw std::invalid_argument("dcsc_lasso needs tx/rx geometries");
    const auto x = generate_active_snapshots(t.txrx->first, t.txrx->second, t.scene, t.snapshots,
                                             t.noise_var, t.seed);
    DcscOptions opt;
    opt.max_grid_points = static_cast<int>(t.cfg->get_int("estimator.max_grid_points", 181));
    const auto res =
        dcsc_sparse_doa(sample_covariance(x), t.txrx->first, t.txrx->second, t.grid, lambda, opt);
    auto est = peaks(res.spectrum, D);
    est.solver_converged = res.converged;
    return est;
  }
  if (name == "sim_compensation") {
    if (!t.coupling) throw std::invalid_argument("sim_compensation needs a coupling model");
    const auto x = detail::per_frequency_snapshots(t)[0];
    SimultaneousCompensationOptions opt;
    opt.bounds_pct = t.cfg->get_double("compensation.bounds_pct", 0.10);
    opt.population = static_cast<int>(t.cfg->get_int("compensation.population", 1000));
    opt.generations = static_cast<int>(t.cfg->get_int("compensation.generations", 1000));
    opt.seed = t.seed ^ 0x5a17ULL;
    const auto res =
        simultaneous_compensation(sample_covariance(x), t.geometry, D, t.grid, *t.coupling, opt);
    if (spectrum_out) {
      spectrum_out->angles_deg = t.grid.angles_deg;
      spectrum_out->values.assign(t.grid.size(), 0.0);
      for (std::size_t d = 0; d < res.doas.angles_deg.size(); ++d) {
        const auto it = std::lower_bound(t.grid.angles_deg.begin(), t.grid.angles_deg.end(),
                                         res.doas.angles_deg[d] - 1e-9);
        if (it != t.grid.angles_deg.end())
          spectrum_out->values[it - t.grid.angles_deg.begin()] = res.powers(d);
      }
    }
    return res.doas;
  }
  if (name == "iter_compensation") {
    if (!t.coupling) throw std::invalid_argument("iter_compensation needs a coupling model");
    const auto x = detail::per_frequency_snapshots(t)[0];
    IterativeCompensationOptions opt;
    opt.lambda = t.cfg->get_double("estimator.lambda", 1.0);
    opt.iterations = static_cast<int>(t.cfg->get_int("compensation.iterations", 20));
    opt.cmaes_generations = static_cast<int>(t.cfg->get_int("compensation.generations", 120));
    opt.seed = t.seed ^ 0x17e2ULL;
    const auto res = iterative_compensation(sample_covariance(x), t.geometry, *t.coupling, t.grid, opt);
    return peaks(res.spectrum, D);
  }
  throw std::invalid_argument("unknown estimator '" + name + "'");
}

struct SweepPoint {
  double value = 0.0;
  double rmse_deg = 0.0;  // Eq-style per-source RMSE averaged over sources
  double rmse_u = 0.0;
  double success_rate = 0.0;
  int trials = 0;
  int failures = 0;  // estimator hard failures recorded, not fatal
};

struct RmseReport {
  std::vector<SweepPoint> points;
  std::string matching = "sorted-pairing";
};

/// Match by sorting both sets and pairing in order (equal cardinality is
/// guaranteed by peak padding); errors in degrees.
inline std::vector<double> match_errors(std::vector<double> est, std::vector<double> truth) {
  std::sort(est.begin(), est.end());
  std::sort(truth.begin(), truth.end());
  std::vector<double> err(truth.size(), 90.0);
  if (est.size() == truth.size()) {
    for (std::size_t i = 0; i < truth.size(); ++i) err[i] = est[i] - truth[i];
  } else {
    // fallback: nearest available estimate per source
    for (std::size_t i = 0; i < truth.size(); ++i) {
      double best = 90.0;
      for (double e : est)
        if (std::abs(e - truth[i]) < std::abs(best)) best = e - truth[i];
      err[i] = best;
    }
  }
  return err;
}

/// Average root-mean-square error over sources: per-source RMSE across the
/// trials first, then the mean over sources.
inline double average_rmse(const std::vector<std::vector<double>>& per_trial_errors) {
  if (per_trial_errors.empty()) return 0.0;
  const std::size_t D = per_trial_errors[0].size();
  double acc = 0.0;
  for (std::size_t d = 0; d < D; ++d) {
    double sq = 0.0;
    for (const auto& e : per_trial_errors) sq += e[d] * e[d];
    acc += std::sqrt(sq / per_trial_errors.size());
  }
  return acc / static_cast<double>(D);
}

inline RmseReport run_experiment(const ExperimentConfig& cfg, const std::string& out_dir = {}) {
  const int trials = static_cast<int>(cfg.get_int("trials", 1));
  if (trials < 1) throw std::invalid_argument("config: trials must be >= 1");
  const std::uint64_t base_seed = static_cast<std::uint64_t>(cfg.get_int("seed", 1));
  const std::string estimator = cfg.require("estimator");
  const SceneTemplate tmpl = scene_from_config(cfg);
  const SweepParam param = sweep_param_from_string(cfg.get("sweep.param"));
  std::vector<double> sweep_values = cfg.get_list("sweep.values");
  if (param == SweepParam::none)
    sweep_values = {0.0};
  else if (sweep_values.empty())
    throw std::invalid_argument("config: sweep.values must be non-empty");
  const double tol = cfg.get_double("success.tol_deg", 2.0);
  const int threads = std::max(1, static_cast<int>(cfg.get_int("threads", 1)));

  TrialContext proto;
  proto.cfg = &cfg;
  if (cfg.has("tx") || cfg.has("active.config")) {
    if (cfg.has("active.config")) {
      const auto params = cfg.get_list("geometry.params");
      if (params.size() != 2) throw std::invalid_argument("active.config needs geometry.params = M,N");
      proto.txrx = coprime_txrx(static_cast<int>(params[0]), static_cast<int>(params[1]),
                                cfg.get("active.config")[0]);
    } else {
      proto.txrx = {ArrayGeometry::parse(cfg.require("tx")), ArrayGeometry::parse(cfg.require("rx"))};
    }
    proto.geometry = proto.txrx->first;
  } else {
    proto.geometry = geometry_from_config(cfg);
  }
  if (cfg.has("coupling.c1_mag")) {
    proto.coupling = synth_coupling(
        proto.geometry,
        std::polar(cfg.get_double("coupling.c1_mag", 0.2), cfg.get_double("coupling.c1_phase", 0.9)),
        cfg.get_double("coupling.gamma", 1.0));
  } else if (cfg.has("coupling.file")) {
    proto.coupling = CouplingModel::read_csv(cfg.get("coupling.file"));
  }
  proto.snapshots = static_cast<int>(cfg.get_int("T", 500));
  proto.noise_var = cfg.get_double("noise_var", 1.0);
  proto.grid = Grid::theta(cfg.get_double("grid.lo", -90.0), cfg.get_double("grid.hi", 90.0),
                           cfg.get_double("grid.step_deg", 1.0));
  proto.peak_grid = cfg.has("peak_grid.step_deg")
                        ? Grid::theta(cfg.get_double("grid.lo", -90.0), cfg.get_double("grid.hi", 90.0),
                                      cfg.get_double("peak_grid.step_deg", 0.1))
                        : proto.grid;

  const bool write = !out_dir.empty();
  if (write) std::filesystem::create_directories(out_dir);

  RmseReport report;
  std::ofstream sweep_csv;
  if (write) {
    sweep_csv.open(out_dir + "/sweep.csv");
    sweep_csv << "param,value,rmse,success_rate,trials\n" << std::setprecision(12);
  }

  const std::string param_name = cfg.get("sweep.param", "none");
  for (std::size_t pi = 0; pi < sweep_values.size(); ++pi) {
    const double value = sweep_values[pi];
    std::vector<std::vector<double>> errors(trials);
    std::vector<std::uint64_t> seeds(trials);
    std::vector<int> failed(trials, 0);
    std::vector<std::vector<double>> estimates(trials);
    std::vector<std::vector<double>> truths(trials);

    auto run_trial = [&](int trial) {
      const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(trial);
      seeds[trial] = seed;
      TrialContext t = proto;
      t.seed = seed;
      t.scene = realize_scene(tmpl, param, value, seed);
      t.model_order = static_cast<int>(cfg.get_int("estimator.d", t.scene.source_count()));
      try {
        const DoaEstimate est = run_estimator(estimator, t);
        estimates[trial] = est.angles_deg;
      } catch (const std::exception&) {
        failed[trial] = 1;
        estimates[trial] = {};
      }
      truths[trial] = t.scene.directions_deg;
      errors[trial] = match_errors(estimates[trial], truths[trial]);
    };

    if (threads == 1) {
      for (int trial = 0; trial < trials; ++trial) run_trial(trial);
    } else {
      std::vector<std::thread> pool;
      std::atomic<int> next{0};
      for (int w = 0; w < threads; ++w)
        pool.emplace_back([&]() {
          for (int i = next.fetch_add(1); i < trials; i = next.fetch_add(1)) run_trial(i);
        });
      for (auto& th : pool) th.join();
    }

    SweepPoint point;
    point.value = value;
    point.trials = trials;
    point.rmse_deg = average_rmse(errors);
    {
      std::vector<std::vector<double>> u_errors(trials);
      for (int trial = 0; trial < trials; ++trial) {
        u_errors[trial].resize(errors[trial].size());
        std::vector<double> st = truths[trial], se = estimates[trial];
        std::sort(st.begin(), st.end());
        std::sort(se.begin(), se.end());
        for (std::size_t d = 0; d < st.size(); ++d)
          u_errors[trial][d] = d < se.size()
                                   ? std::sin(deg2rad(se[d])) - std::sin(deg2rad(st[d]))
                                   : 1.0;
      }
      point.rmse_u = average_rmse(u_errors);
    }
    int successes = 0;
    for (int trial = 0; trial < trials; ++trial) {
      bool ok = !failed[trial];
      for (double e : errors[trial]) ok = ok && std::abs(e) <= tol;
      successes += ok;
      point.failures += failed[trial];
    }
    point.success_rate = static_cast<double>(successes) / trials;
    report.points.push_back(point);

    if (write) {
      sweep_csv << param_name << "," << value << "," << point.rmse_deg << ","
                << point.success_rate << "," << trials << "\n";
      std::ofstream tcsv(out_dir + "/trials_point" + std::to_string(pi) + ".csv");
      tcsv << std::setprecision(12) << "trial,seed";
      const std::size_t D = truths.empty() ? 0 : truths[0].size();
      for (std::size_t d = 1; d <= D; ++d) tcsv << ",est_" << d;
      tcsv << "\n";
      for (int trial = 0; trial < trials; ++trial) {
        tcsv << trial << "," << seeds[trial];
        std::vector<double> se = estimates[trial];
        std::sort(se.begin(), se.end());
        for (std::size_t d = 0; d < D; ++d)
          tcsv << "," << (d < se.size() ? std::to_string(se[d]) : std::string("nan"));
        tcsv << "\n";
      }
    }
  }
  return report;
}

/// Minimal line chart, one polyline per series.
inline void write_svg(const std::string& path, const std::vector<double>& x,
                      const std::vector<std::pair<std::string, std::vector<double>>>& series,
                      const std::string& x_label, const std::string& y_label) {
  if (x.empty() || series.empty()) throw std::invalid_argument("write_svg: empty data");
  const int width = 720, height = 480, margin = 60;
  double ymin = 1e300, ymax = -1e300;
  for (const auto& [name, ys] : series)
    for (double v : ys) {
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  if (ymax <= ymin) ymax = ymin + 1.0;
  const double xmin = x.front(), xmax = x.back() == x.front() ? x.front() + 1.0 : x.back();
  auto px = [&](double v) { return margin + (v - xmin) / (xmax - xmin) * (width - 2 * margin); };
  auto py = [&](double v) {
    return height - margin - (v - ymin) / (ymax - ymin) * (height - 2 * margin);
  };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
     << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
  os << "<line x1='" << margin << "' y1='" << height - margin << "' x2='" << width - margin
     << "' y2='" << height - margin << "' stroke='black'/>\n";
  os << "<line x1='" << margin << "' y1='" << margin << "' x2='" << margin << "' y2='"
     << height - margin << "' stroke='black'/>\n";
  os << "<text x='" << width / 2 << "' y='" << height - 15 << "' text-anchor='middle'>" << x_label
     << "</text>\n";
  os << "<text x='18' y='" << height / 2 << "' text-anchor='middle' transform='rotate(-90 18 "
     << height / 2 << ")'>" << y_label << "</text>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double xv = xmin + (xmax - xmin) * tick / 4.0;
    const double yv = ymin + (ymax - ymin) * tick / 4.0;
    os << "<text x='" << px(xv) << "' y='" << height - margin + 18
       << "' text-anchor='middle' font-size='11'>" << std::setprecision(4) << xv << "</text>\n";
    os << "<text x='" << margin - 8 << "' y='" << py(yv) + 4
       << "' text-anchor='end' font-size='11'>" << std::setprecision(4) << yv << "</text>\n";
  }
  int color = 0;
  for (const auto& [name, ys] : series) {
    os << "<polyline fill='none' stroke='" << colors[color % 5] << "' stroke-width='1.5' points='";
    for (std::size_t i = 0; i < x.size() && i < ys.size(); ++i)
      os << px(x[i]) << "," << py(ys[i]) << " ";
    os << "'/>\n";
    os << "<text x='" << width - margin + 4 << "' y='" << margin + 16 * color
       << "' font-size='11' fill='" << colors[color % 5] << "'>" << name << "</text>\n";
    ++color;
  }
  os << "</svg>\n";
}

}  // namespace doalab
