#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "doalab/harness.hpp"

using namespace doalab;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream is(path);
  REQUIRE(is);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = ExperimentConfig::parse_string(R"(
# comment
geometry = coprime_extended
geometry.params = 2, 3
T = 500
freq.ratios = 1, 8/9
scene.coherent = 0,1
scene.coherent = 2,3
)");
  CHECK(cfg.get("geometry") == "coprime_extended");
  CHECK(cfg.get_list("geometry.params") == std::vector<double>{2, 3});
  CHECK(cfg.get_int("T", 0) == 500);
  CHECK(cfg.get_rationals("freq.ratios") == std::vector<Rational>{Rational(1), Rational(8, 9)});
  CHECK(cfg.get_all("scene.coherent").size() == 2);
  CHECK_THROWS_AS(cfg.require("missing"), std::invalid_argument);
  CHECK_THROWS_AS(ExperimentConfig::parse_string("not a key value line"), std::invalid_argument);
}

TEST_CASE("match errors pair sorted sets") {
  const auto e = match_errors({10.0, -20.0, 50.0}, {-20.5, 10.5, 49.0});
  CHECK(e[0] == Catch::Approx(0.5));
  CHECK(e[1] == Catch::Approx(-0.5));
  CHECK(e[2] == Catch::Approx(1.0));
}

TEST_CASE("noise-free on-grid music gives zero rmse") {
  const auto cfg = ExperimentConfig::parse_string(R"(
geometry = ula
geometry.params = 8
scene.directions_deg = -20, 10, 50
estimator = music
T = 64
noise_var = 0
trials = 1
seed = 3
)");
  const auto report = run_experiment(cfg);
  REQUIRE(report.points.size() == 1);
  CHECK(report.points[0].rmse_deg == 0.0);
  CHECK(report.points[0].success_rate == 1.0);
}

TEST_CASE("config validation failures") {
  auto cfg = ExperimentConfig::parse_string("estimator = music\ntrials = 0\nscene.u = 0\ngeometry = ula\ngeometry.params = 4");
  CHECK_THROWS_AS(run_experiment(cfg), std::invalid_argument);
  auto cfg2 = ExperimentConfig::parse_string("estimator = nope\ntrials = 1\nscene.u = 0\ngeometry = ula\ngeometry.params = 4\nsuccess.tol_deg = 2");
  const auto rep = run_experiment(cfg2);  // estimator failure is recorded, not fatal
  CHECK(rep.points[0].failures == 1);
  CHECK(rep.points[0].success_rate == 0.0);
}

TEST_CASE("artifacts are deterministic and the report matches a recomputation") {
  const std::string dir = "harness_artifacts_test";
  const auto cfg = ExperimentConfig::parse_string(R"(
geometry = coprime_extended
geometry.params = 2, 3
scene.directions_deg = -40, 0, 35
estimator = music_ss
peak_grid.step_deg = 0.5
T = 200
trials = 5
seed = 11
success.tol_deg = 2
)");
  const auto report = run_experiment(cfg, dir);
  const std::string sweep1 = slurp(dir + "/sweep.csv");
  const std::string trials1 = slurp(dir + "/trials_point0.csv");

  const auto report2 = run_experiment(cfg, dir);
  CHECK(slurp(dir + "/sweep.csv") == sweep1);
  CHECK(slurp(dir + "/trials_point0.csv") == trials1);

  // independent recomputation of the average RMSE from the per-trial CSV
  std::istringstream ts(trials1);
  std::string line;
  std::getline(ts, line);  // header
  std::vector<std::vector<double>> errors;
  const std::vector<double> truth{-40, 0, 35};
  while (std::getline(ts, line)) {
    std::istringstream ls(line);
    std::string tok;
    std::getline(ls, tok, ',');
    std::getline(ls, tok, ',');
    std::vector<double> est;
    while (std::getline(ls, tok, ',')) est.push_back(std::stod(tok));
    errors.push_back(match_errors(est, truth));
  }
  CHECK(errors.size() == 5);
  CHECK(std::abs(average_rmse(errors) - report.points[0].rmse_deg) < 1e-12);

  std::filesystem::remove_all(dir);
}

TEST_CASE("multithreaded trials produce identical bytes") {
  const std::string dir1 = "harness_mt_1", dir4 = "harness_mt_4";
  auto cfg = ExperimentConfig::parse_string(R"(
geometry = ula
geometry.params = 8
scene.directions_deg = -15, 25
estimator = root_music
T = 100
trials = 8
seed = 5
)");
  run_experiment(cfg, dir1);
  cfg.set("threads", "4");
  run_experiment(cfg, dir4);
  CHECK(slurp(dir1 + "/sweep.csv") == slurp(dir4 + "/sweep.csv"));
  CHECK(slurp(dir1 + "/trials_point0.csv") == slurp(dir4 + "/trials_point0.csv"));
  std::filesystem::remove_all(dir1);
  std::filesystem::remove_all(dir4);
}

TEST_CASE("delta_snr sweep raises the first source power") {
  SceneTemplate t;
  t.u = {0.0, 0.03};
  t.snr_db = {0.0, 0.0};
  const auto scene = realize_scene(t, SweepParam::delta_snr, 15.0, 1);
  CHECK(scene.powers(0, 0) == Catch::Approx(std::pow(10.0, 1.5)));
  CHECK(scene.powers(1, 0) == Catch::Approx(1.0));

  const auto scene2 = realize_scene(t, SweepParam::delta_u, 0.1, 1);
  CHECK(scene2.directions_deg[1] == Catch::Approx(rad2deg(std::asin(0.1))));
}

TEST_CASE("sparse versus subspace crossover trend") {
  // small-trial version of the separation/power sweep comparison
  auto base = ExperimentConfig::parse_string(R"(
geometry = coprime_extended
geometry.params = 3, 5
scene.u = 0, 0.03
scene.snr_db = 10, 0
estimator = coarray_lasso
estimator.lambda = 4.0
peak_grid.step_deg = 0.1
T = 500
trials = 10
seed = 7
)");
  const double lasso_close = run_experiment(base).points[0].rmse_deg;
  base.set("estimator", "music_ss");
  const double music_close = run_experiment(base).points[0].rmse_deg;
  CHECK(lasso_close < music_close);

  base.set("scene.u", "0, 0.09");
  const double music_wide = run_experiment(base).points[0].rmse_deg;
  base.set("estimator", "coarray_lasso");
  const double lasso_wide = run_experiment(base).points[0].rmse_deg;
  CHECK(music_wide <= lasso_wide);
}

TEST_CASE("svg writer emits a well-formed chart") {
  const std::string path = "chart_test.svg";
  write_svg(path, {0, 1, 2, 3}, {{"a", {1.0, 0.5, 0.25, 0.125}}, {"b", {0.2, 0.3, 0.4, 0.5}}},
            "x", "rmse");
  const std::string svg = slurp(path);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("polyline") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  std::remove(path.c_str());
}
