// Command-line front end: coarray diagnostics, frequency planning, snapshot
// simulation, single-shot estimation, Monte Carlo sweeps, and bundled
// experiment reproductions. Exit codes: 0 ok, 2 config error, 3 estimator
// hard failure.

#include <CLI11.hpp>
#include <iostream>
#include <map>

#include "doalab/harness.hpp"

using namespace doalab;

namespace {

void print_coarray(const Coarray& c, const std::string& label) {
  std::cout << label << ": " << c.unique_count() << " unique lags [" << c.min_lag() << ", "
            << c.max_lag() << "]\n  lags:";
  for (int l : c.lags) std::cout << " " << l;
  std::cout << "\n  weights:";
  for (int l : c.lags) std::cout << " " << c.weight(l);
  std::cout << "\n  holes:";
  const auto holes = c.holes_symmetric();
  if (holes.empty()) std::cout << " none";
  for (int h : holes) std::cout << " " << h;
  std::cout << "\n";
  if (c.kind == CoarrayKind::difference)
    std::cout << "  contiguous half extent L = " << c.contiguous_half_extent << "\n";
}

int cmd_coarray(const std::string& kind, const std::vector<int>& params,
                const std::string& positions, const std::string& tx, const std::string& rx) {
  if (!tx.empty() || !rx.empty()) {
    if (tx.empty() || rx.empty()) throw std::invalid_argument("need both --tx and --rx");
    const auto txg = ArrayGeometry::parse(tx);
    const auto rxg = ArrayGeometry::parse(rx);
    print_coarray(sum_coarray(txg, rxg), "sum coarray");
    print_coarray(dcsc(txg, rxg), "difference coarray of the sum coarray");
    return 0;
  }
  ArrayGeometry geom = positions.empty()
                           ? build_geometry(geometry_kind_from_string(kind), params)
                           : ArrayGeometry::parse(positions);
  std::cout << "geometry: " << geom.serialize() << "\n";
  print_coarray(difference_coarray(geom), "difference coarray");
  if (kind == "coprime_extended" && params.size() == 2) {
    const auto f = coprime_closed_forms(params[0], params[1]);
    std::cout << "closed forms: sensors " << f.sensor_count << ", unique lags "
              << f.coarray_unique_count << ", holes " << f.hole_count << ", first hole "
              << f.first_hole_lag << ", filled extent " << f.filled_half_extent << "\n";
  }
  return 0;
}

int cmd_freqplan(int M, int N, const std::string& out_csv) {
  const auto geom = build_geometry(GeometryKind::coprime_extended, {M, N});
  const auto plan = hole_filling_plan(difference_coarray(geom));
  if (plan.empty()) {
    std::cout << "coarray is hole-free; no additional frequencies needed\n";
    return 0;
  }
  const auto sel = multifreq_sensor_selection(geom, plan);
  std::cout << "frequency      hole  filler  chosen pair\n";
  for (const auto& e : sel.annotated.entries)
    std::cout << "w = (" << e.hole_lag << "/" << e.filler_lag << ") w0    +-" << e.hole_lag
              << "    " << e.filler_lag << "      [" << e.chosen_pair.first << " "
              << e.chosen_pair.second << "]d0\n";
  std::cout << "max frequency separation: " << max_frequency_separation(M, N).to_double() * 100.0
            << "% of w0\nmulti-frequency sensors:";
  for (int s : sel.sensors) std::cout << " " << s;
  std::cout << " (" << sel.sensors.size() << "/" << geom.size() << ")\n";
  if (!out_csv.empty()) {
    sel.annotated.write_csv(out_csv);
    std::cout << "wrote " << out_csv << "\n";
  }
  return 0;
}

TrialContext context_from_config(const ExperimentConfig& cfg) {
  TrialContext t;
  t.cfg = &cfg;
  if (cfg.has("tx")) {
    t.txrx = {ArrayGeometry::parse(cfg.require("tx")), ArrayGeometry::parse(cfg.require("rx"))};
    t.geometry = t.txrx->first;
  } else {
    t.geometry = geometry_from_config(cfg);
  }
  if (cfg.has("coupling.c1_mag"))
    t.coupling = synth_coupling(t.geometry,
                                std::polar(cfg.get_double("coupling.c1_mag", 0.2),
                                           cfg.get_double("coupling.c1_phase", 0.9)),
                                cfg.get_double("coupling.gamma", 1.0));
  else if (cfg.has("coupling.file"))
    t.coupling = CouplingModel::read_csv(cfg.get("coupling.file"));
  const SceneTemplate tmpl = scene_from_config(cfg);
  t.seed = cfg.get_int("seed", 1);
  t.scene = realize_scene(tmpl, SweepParam::none, 0.0, t.seed);
  t.snapshots = static_cast<int>(cfg.get_int("T", 500));
  t.noise_var = cfg.get_double("noise_var", 1.0);
  t.grid = Grid::theta(cfg.get_double("grid.lo", -90.0), cfg.get_double("grid.hi", 90.0),
                       cfg.get_double("grid.step_deg", 1.0));
  t.peak_grid = cfg.has("peak_grid.step_deg")
                    ? Grid::theta(cfg.get_double("grid.lo", -90.0), cfg.get_double("grid.hi", 90.0),
                                  cfg.get_double("peak_grid.step_deg", 0.1))
                    : t.grid;
  t.model_order = static_cast<int>(cfg.get_int("estimator.d", t.scene.source_count()));
  return t;
}

int cmd_simulate(const std::string& config_path, const std::string& out) {
  const auto cfg = ExperimentConfig::parse_file(config_path);
  const auto t = context_from_config(cfg);
  const MatrixC* c = t.coupling ? &t.coupling->coupling() : nullptr;
  const auto x = t.txrx ? generate_active_snapshots(t.txrx->first, t.txrx->second, t.scene,
                                                    t.snapshots, t.noise_var, t.seed)
                        : generate_snapshots(t.geometry, t.scene, t.snapshots, t.noise_var, t.seed, c);
  x.write_binary(out);
  std::cout << "wrote " << x.sensors() << " x " << x.snapshots() << " snapshots to " << out << "\n";
  return 0;
}

int cmd_estimate(const std::string& config_path, const std::string& spectrum_csv,
                 const std::string& spectrum_svg) {
  const auto cfg = ExperimentConfig::parse_file(config_path);
  const auto t = context_from_config(cfg);
  SpatialSpectrum spectrum;
  const auto est = run_estimator(cfg.require("estimator"), t, &spectrum);
  std::cout << "estimates (deg):";
  for (double a : est.angles_deg) std::cout << " " << a;
  std::cout << "\ntruth (deg):    ";
  for (double a : t.scene.directions_deg) std::cout << " " << a;
  std::cout << "\n";
  if (est.padded) std::cout << "note: fewer strict peaks than requested; padded\n";
  if (!spectrum_csv.empty() && spectrum.size()) {
    spectrum.write_csv(spectrum_csv);
    std::cout << "wrote " << spectrum_csv << "\n";
  }
  if (!spectrum_svg.empty() && spectrum.size()) {
    write_svg(spectrum_svg, spectrum.angles_deg, {{cfg.require("estimator"), spectrum.values}},
              "angle (deg)", "power");
    std::cout << "wrote " << spectrum_svg << "\n";
  }
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir,
              const std::string& format, int threads, long seed_override) {
  auto cfg = ExperimentConfig::parse_file(config_path);
  if (threads > 0) cfg.set("threads", std::to_string(threads));
  if (seed_override >= 0) cfg.set("seed", std::to_string(seed_override));
  const auto report = run_experiment(cfg, out_dir);
  std::cout << "param,value,rmse_deg,rmse_u,success_rate,trials\n";
  std::vector<double> xs, rmse;
  for (const auto& p : report.points) {
    std::cout << cfg.get("sweep.param", "none") << "," << p.value << "," << p.rmse_deg << ","
              << p.rmse_u << "," << p.success_rate << "," << p.trials << "\n";
    xs.push_back(p.value);
    rmse.push_back(p.rmse_deg);
  }
  if (format == "svg" && !out_dir.empty())
    write_svg(out_dir + "/sweep.svg", xs, {{cfg.require("estimator"), rmse}},
              cfg.get("sweep.param", "point"), "rmse (deg)");
  return 0;
}

// Bundled desk-scale reproductions: each is a list of labeled single-run or
// sweep configs sharing one output figure.
struct ReproCase {
  std::string description;
  bool is_sweep = false;
  std::vector<std::pair<std::string, std::string>> runs;  // label -> config text
};

const std::map<std::string, ReproCase>& repro_cases() {
  static const std::map<std::string, ReproCase> cases = {
      {"fig2.12",
       {"ten-element ULA, three sources: conventional, subspace, and sparse spectra",
        false,
        {{"das", R"(
geometry = ula
geometry.params = 10
scene.directions_deg = -20, 10, 50
estimator = das
peak_grid.step_deg = 0.2
T = 500
seed = 3
)"},
         {"music", R"(
geometry = ula
geometry.params = 10
scene.directions_deg = -20, 10, 50
estimator = music
peak_grid.step_deg = 0.2
T = 500
seed = 3
)"},
         {"l1_svd", R"(
geometry = ula
geometry.params = 10
scene.directions_deg = -20, 10, 50
estimator = l1_svd
estimator.lambda = 0.35
T = 500
seed = 3
)"}}}},
      {"fig2.15",
       {"six-element co-prime, seven sources: more sources than sensors",
        false,
        {{"music_ss", R"(
geometry = coprime_extended
geometry.params = 2, 3
scene.directions_deg = -60, -40, -20, 0, 20, 40, 60
estimator = music_ss
peak_grid.step_deg = 0.2
T = 500
seed = 1
)"},
         {"music_aug", R"(
geometry = coprime_extended
geometry.params = 2, 3
scene.directions_deg = -60, -40, -20, 0, 20, 40, 60
estimator = music_aug
peak_grid.step_deg = 0.2
T = 500
seed = 1
)"},
         {"coarray_lasso", R"(
geometry = coprime_extended
geometry.params = 2, 3
scene.directions_deg = -60, -40, -20, 0, 20, 40, 60
estimator = coarray_lasso
estimator.lambda = 0.25
T = 500
seed = 1
)"}}}},
      {"fig2.18a",
       {"sparse vs subspace, delta_u = 0.03: RMSE vs delta SNR",
        true,
        {{"coarray_lasso", R"(
geometry = coprime_extended
geometry.params = 3, 5
scene.u = 0, 0.03
scene.snr_db = 0, 0
estimator = coarray_lasso
estimator.lambda = 4.0
peak_grid.step_deg = 0.1
sweep.param = delta_snr
sweep.values = 0, 5, 10, 15, 20
T = 500
trials = 50
seed = 7
)"},
         {"music_ss", R"(
geometry = coprime_extended
geometry.params = 3, 5
scene.u = 0, 0.03
scene.snr_db = 0, 0
estimator = music_ss
peak_grid.step_deg = 0.1
sweep.param = delta_snr
sweep.values = 0, 5, 10, 15, 20
T = 500
trials = 50
seed = 7
)"}}}},
      {"fig3.7",
       {"dual-frequency MUSIC, nine proportional sources (vs zero-filled baseline)",
        false,
        {{"dual_frequency", R"(
geometry = coprime_extended
geometry.params = 2, 3
scene.u = -0.95, -0.7125, -0.475, -0.2375, 0, 0.2375, 0.475, 0.7125, 0.95
freq.ratios = 1, 8/9
estimator = mf_music
peak_grid.step_deg = 0.1
T = 2000
seed = 3000
)"},
         {"single_zero_filled", R"(
geometry = coprime_extended
geometry.params = 2, 3
scene.u = -0.95, -0.7125, -0.475, -0.2375, 0, 0.2375, 0.475, 0.7125, 0.95
freq.ratios = 1, 8/9
estimator = mf_music_zero_fill
peak_grid.step_deg = 0.1
T = 2000
seed = 3000
)"}}}},
      {"fig3.24",
       {"dual-frequency sparse reconstruction, thirteen proportional sources",
        false,
        {{"mf_lasso", R"(
geometry = coprime_extended
geometry.params = 2, 3
scene.directions_deg = -75, -62.5, -50, -37.5, -25, -12.5, 0, 12.5, 25, 37.5, 50, 62.5, 75
scene.snr_db = 10
scene.waveform = bpsk
freq.ratios = 1, 2
estimator = mf_lasso
estimator.lambda = 0.1
T = 2000
seed = 300
)"}}}},
      {"fig3.28",
       {"dual-frequency group-sparse reconstruction, non-proportional spectra",
        false,
        {{"mf_group_lasso", R"(
geometry = coprime_extended
geometry.params = 2, 3
scene.directions_deg = -60, -42.857, -25.714, -8.571, 8.571, 25.714, 42.857, 60
scene.snr_db = 10
scene.nonprop_db_range = 0, 20
freq.ratios = 1, 2
estimator = mf_group_lasso
estimator.beta = 0.1
T = 2000
seed = 400
)"}}}},
      {"fig4.2",
       {"weak source next to a strong one: contiguous vs interpolated coarray",
        false,
        {{"music_contiguous", R"(
geometry = coprime_extended
geometry.params = 3, 5
scene.u = 0, 0.03
scene.snr_db = 20, 0
estimator = music_ss
peak_grid.step_deg = 0.05
grid.lo = -30
grid.hi = 30
T = 500
seed = 2
)"},
         {"interpolated", R"(
geometry = coprime_extended
geometry.params = 3, 5
scene.u = 0, 0.03
scene.snr_db = 20, 0
estimator = interp_music
estimator.lambda = 10
estimator.l_full = 25
peak_grid.step_deg = 0.05
grid.lo = -30
grid.hi = 30
T = 500
seed = 2
)"}}}},
      {"fig4.11",
       {"extended coarray aperture beyond the physical extent",
        false,
        {{"populated", R"(
geometry = coprime_extended
geometry.params = 2, 3
scene.u = 0, 0.14
scene.snr_db = 30, 0
estimator = interp_music
estimator.lambda = 10
estimator.l_full = 9
estimator.allow_extrapolation = 1
peak_grid.step_deg = 0.05
grid.lo = -45
grid.hi = 45
T = 500
seed = 13
)"},
         {"extended", R"(
geometry = coprime_extended
geometry.params = 2, 3
scene.u = 0, 0.14
scene.snr_db = 30, 0
estimator = interp_music
estimator.lambda = 10
estimator.l_full = 14
estimator.allow_extrapolation = 1
peak_grid.step_deg = 0.05
grid.lo = -45
grid.hi = 45
T = 500
seed = 13
)"}}}},
      {"fig5.9",
       {"simultaneous coupling compensation on the coupled co-prime array",
        false,
        {{"sim_compensation", R"(
geometry = coprime_extended
geometry.params = 2, 3
scene.u = -0.8, -0.5333, -0.2667, 0, 0.2667, 0.5333, 0.8
scene.snr_db = 10
coupling.c1_mag = 0.225
coupling.c1_phase = 0.9
coupling.gamma = 0.85
estimator = sim_compensation
compensation.population = 1000
compensation.generations = 1000
T = 1000
seed = 101
)"}}}},
      {"fig5.7",
       {"iterative compensation of a perturbed coupling model (final spectrum)",
        false,
        {{"iter_compensation", R"(
geometry = mra
geometry.params = 6
scene.u = -0.7, -0.5143, -0.3286, -0.1429, 0.0429, 0.2286, 0.4143, 0.6
scene.snr_db = 10
coupling.c1_mag = 0.22
coupling.c1_phase = 0.9
coupling.gamma = 0.9
estimator = iter_compensation
estimator.lambda = 1.0
compensation.iterations = 10
compensation.generations = 120
T = 1000
seed = 3
)"}}}},
      {"fig6.4",
       {"MIMO minimum redundancy array, seven targets (three coherent)",
        false,
        {{"l1_svd", R"(
tx = d0=0.5; pos=0,1,3
rx = d0=0.5; pos=0,7
scene.directions_deg = -55, -40, -15, 5, 20, 45, 65
scene.snr_db = 10
scene.coherent = 0,1,2
estimator = l1_svd
estimator.lambda = 0.05
T = 500
seed = 6
)"},
         {"dcsc_lasso", R"(
tx = d0=0.5; pos=0,1,3
rx = d0=0.5; pos=0,7
scene.directions_deg = -55, -40, -15, 5, 20, 45, 65
scene.snr_db = 10
scene.coherent = 0,1,2
estimator = dcsc_lasso
estimator.lambda = 0.3
T = 500
seed = 6
)"}}}},
      {"fig6.5",
       {"MIMO minimum redundancy array, ten uncorrelated targets",
        false,
        {{"dcsc_lasso", R"(
tx = d0=0.5; pos=0,1,3
rx = d0=0.5; pos=0,7
scene.directions_deg = -50, -39, -28, -17, -6, 6, 17, 28, 39, 50
scene.snr_db = 10
estimator = dcsc_lasso
estimator.lambda = 0.3
T = 500
seed = 10
)"}}}},
  };
  return cases;
}

int cmd_reproduce(const std::string& id, const std::string& out_dir, int trials_override,
                  long seed_override, const std::string& format) {
  const auto it = repro_cases().find(id);
  if (it == repro_cases().end()) {
    std::cerr << "unknown figure id '" << id << "'; available:\n";
    for (const auto& [key, c] : repro_cases())
      std::cerr << "  " << key << "  " << c.description << "\n";
    return 2;
  }
  std::filesystem::create_directories(out_dir);
  const auto& repro = it->second;
  std::cout << id << ": " << repro.description << "\n";

  std::vector<std::pair<std::string, std::vector<double>>> series;
  std::vector<double> xs;
  for (const auto& [label, text] : repro.runs) {
    auto cfg = ExperimentConfig::parse_string(text);
    if (trials_override > 0 && repro.is_sweep) cfg.set("trials", std::to_string(trials_override));
    if (seed_override >= 0) cfg.set("seed", std::to_string(seed_override));
    if (repro.is_sweep) {
      const auto report = run_experiment(cfg, out_dir + "/" + label);
      std::vector<double> rmse;
      xs.clear();
      for (const auto& p : report.points) {
        xs.push_back(p.value);
        rmse.push_back(p.rmse_deg);
        std::cout << "  " << label << " " << cfg.get("sweep.param") << "=" << p.value << ": rmse "
                  << p.rmse_deg << " deg, success " << p.success_rate << "\n";
      }
      series.push_back({label, rmse});
    } else {
      const auto t = context_from_config(cfg);
      SpatialSpectrum spectrum;
      const auto est = run_estimator(cfg.require("estimator"), t, &spectrum);
      std::cout << "  " << label << " estimates:";
      for (double a : est.angles_deg) std::cout << " " << a;
      std::cout << "\n";
      if (spectrum.size()) {
        spectrum.write_csv(out_dir + "/" + label + ".csv");
        const double peak = *std::max_element(spectrum.values.begin(), spectrum.values.end());
        std::vector<double> norm = spectrum.values;
        if (peak > 0)
          for (double& v : norm) v /= peak;
        xs = spectrum.angles_deg;
        series.push_back({label, norm});
      }
    }
  }
  if (format != "csv" && !series.empty()) {
    const std::string path = out_dir + "/" + id + ".svg";
    write_svg(path, xs, series, repro.is_sweep ? "sweep value" : "angle (deg)",
              repro.is_sweep ? "rmse (deg)" : "normalized power");
    std::cout << "wrote " << path << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse-array direction-of-arrival estimation laboratory"};
  app.require_subcommand(1);

  std::string kind = "coprime_extended", positions, tx, rx;
  std::vector<int> params;
  auto* coarray = app.add_subcommand("coarray", "geometry and coarray diagnostics");
  coarray->add_option("--kind", kind, "ula|coprime_basic|coprime_extended|nested|mra|mha");
  coarray->add_option("--params", params, "kind-specific integers (e.g. M N)");
  int opt_m = 0, opt_n = 0;
  coarray->add_option("-M", opt_m, "co-prime M (with --kind coprime_*)");
  coarray->add_option("-N", opt_n, "co-prime N");
  coarray->add_option("--positions", positions, "explicit geometry 'd0=..; pos=..'");
  coarray->add_option("--tx", tx, "transmit geometry for sum-coarray mode");
  coarray->add_option("--rx", rx, "receive geometry for sum-coarray mode");

  int fp_m = 0, fp_n = 0;
  std::string fp_csv;
  auto* freqplan = app.add_subcommand("freqplan", "hole-filling frequency plan for a co-prime array");
  freqplan->add_option("-M", fp_m, "co-prime M")->required();
  freqplan->add_option("-N", fp_n, "co-prime N")->required();
  freqplan->add_option("--csv", fp_csv, "write the plan as CSV");

  std::string sim_config, sim_out = "snapshots.bin";
  auto* simulate = app.add_subcommand("simulate", "generate snapshots from a config file");
  simulate->add_option("--config", sim_config, "experiment config")->required();
  simulate->add_option("--out", sim_out, "output binary path");

  std::string est_config, est_csv, est_svg;
  auto* estimate = app.add_subcommand("estimate", "run one estimator trial from a config file");
  estimate->add_option("--config", est_config, "experiment config")->required();
  estimate->add_option("--spectrum", est_csv, "write the spectrum CSV");
  estimate->add_option("--svg", est_svg, "write the spectrum SVG");

  std::string sweep_config, sweep_out = "sweep_out", sweep_format = "csv";
  int sweep_threads = 0;
  long seed_override = -1;
  auto* sweep = app.add_subcommand("sweep", "Monte Carlo sweep from a config file");
  sweep->add_option("--config", sweep_config, "experiment config")->required();
  sweep->add_option("--out", sweep_out, "artifact directory");
  sweep->add_option("--format", sweep_format, "csv|svg");
  sweep->add_option("--threads", sweep_threads, "worker threads (deterministic either way)");
  sweep->add_option("--seed", seed_override, "override the config seed");

  std::string repro_id, repro_out = "repro_out", repro_format = "svg";
  int repro_trials = 0;
  long repro_seed = -1;
  auto* reproduce = app.add_subcommand("reproduce", "bundled experiment reproductions");
  reproduce->add_option("figure", repro_id, "figure id (run with an unknown id to list)");
  reproduce->add_option("--out", repro_out, "artifact directory");
  reproduce->add_option("--trials", repro_trials, "override sweep trial count");
  reproduce->add_option("--seed", repro_seed, "override the config seed");
  reproduce->add_option("--format", repro_format, "csv|svg");

  CLI11_PARSE(app, argc, argv);

  try {
    if (coarray->parsed()) {
      if (opt_m > 0 && opt_n > 0) params = {opt_m, opt_n};
      return cmd_coarray(kind, params, positions, tx, rx);
    }
    if (freqplan->parsed()) return cmd_freqplan(fp_m, fp_n, fp_csv);
    if (simulate->parsed()) return cmd_simulate(sim_config, sim_out);
    if (estimate->parsed()) return cmd_estimate(est_config, est_csv, est_svg);
    if (sweep->parsed())
      return cmd_sweep(sweep_config, sweep_out, sweep_format, sweep_threads, seed_override);
    if (reproduce->parsed())
      return cmd_reproduce(repro_id, repro_out, repro_trials, repro_seed, repro_format);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "estimator failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
