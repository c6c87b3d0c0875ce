#include <catch2/catch_amalgamated.hpp>

#include "doalab/multifreq.hpp"

using namespace doalab;

namespace {

double nearest_error(const std::vector<double>& est, double truth) {
  double best = 1e9;
  for (double e : est) best = std::min(best, std::abs(e - truth));
  return best;
}

std::vector<double> u_grid_directions(double lo, double hi, int count) {
  std::vector<double> dirs;
  for (int k = 0; k < count; ++k)
    dirs.push_back(rad2deg(std::asin(lo + (hi - lo) * k / (count - 1))));
  return dirs;
}

}  // namespace

TEST_CASE("dual frequency ratio closed form") {
  CHECK(dual_frequency_ratio(2, 3) == Rational(8, 9));
  CHECK(dual_frequency_ratio(5, 7) == Rational(40, 41));
  CHECK(dual_frequency_ratio(4, 7) == Rational(32, 33));
  CHECK_THROWS_AS(dual_frequency_ratio(2, 4), std::invalid_argument);
}

TEST_CASE("maximum frequency separation reproduces the reference table") {
  CHECK(max_frequency_separation(2, 3).to_double() * 100 == Catch::Approx(11.11).margin(0.01));
  CHECK(max_frequency_separation(3, 4).to_double() * 100 == Catch::Approx(10.00).margin(0.01));
  CHECK(max_frequency_separation(3, 5).to_double() * 100 == Catch::Approx(8.00).margin(0.01));
  CHECK(max_frequency_separation(5, 7).to_double() * 100 == Catch::Approx(6.35).margin(0.01));
  CHECK(max_frequency_separation(7, 9).to_double() * 100 == Catch::Approx(5.13).margin(0.01));
}

TEST_CASE("hole filling plan for the (4,5) co-prime array") {
  const auto geom = build_geometry(GeometryKind::coprime_extended, {4, 5});
  const auto plan = hole_filling_plan(difference_coarray(geom));
  REQUIRE(plan.entries.size() == 6);
  const std::vector<std::pair<int, int>> expected{{24, 25}, {28, 30}, {29, 30},
                                                  {32, 35}, {33, 35}, {34, 35}};
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(plan.entries[i].hole_lag == expected[i].first);
    CHECK(plan.entries[i].filler_lag == expected[i].second);
    CHECK(plan.entries[i].ratio == Rational(expected[i].first, expected[i].second));
  }
}

TEST_CASE("hole filling plan for the (5,7) co-prime array") {
  const auto geom = build_geometry(GeometryKind::coprime_extended, {5, 7});
  const auto plan = hole_filling_plan(difference_coarray(geom));
  REQUIRE(plan.entries.size() == 12);
  const std::vector<std::pair<int, int>> expected{{40, 41}, {45, 46}, {47, 48}, {50, 51},
                                                  {52, 53}, {54, 56}, {55, 56}, {57, 58},
                                                  {59, 63}, {60, 63}, {61, 63}, {62, 63}};
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CAPTURE(i);
    CHECK(plan.entries[i].hole_lag == expected[i].first);
    CHECK(plan.entries[i].filler_lag == expected[i].second);
  }
}

TEST_CASE("hole-free arrays need no plan") {
  const auto plan = hole_filling_plan(difference_coarray(build_geometry(GeometryKind::mra, {6})));
  CHECK(plan.empty());
  CHECK(plan.operating_ratios() == std::vector<Rational>{Rational(1)});
}

TEST_CASE("plan ratios stay below one and reach the separation bound") {
  for (auto [M, N] : {std::pair{2, 3}, {3, 4}, {3, 5}, {4, 5}, {4, 7}, {5, 7}, {7, 9}}) {
    CAPTURE(M, N);
    const auto plan =
        hole_filling_plan(difference_coarray(build_geometry(GeometryKind::coprime_extended, {M, N})));
    Rational min_ratio(1);
    for (const auto& e : plan.entries) {
      CHECK(e.ratio < Rational(1));
      if (e.ratio < min_ratio) min_ratio = e.ratio;
    }
    CHECK(Rational(1) - min_ratio == max_frequency_separation(M, N));
  }
}

TEST_CASE("sensor selection matches the reference tables") {
  {
    const auto geom = build_geometry(GeometryKind::coprime_extended, {4, 7});
    const auto sel = multifreq_sensor_selection(geom, hole_filling_plan(difference_coarray(geom)));
    CHECK(sel.sensors == std::vector<int>{0, 4, 8, 12, 16, 49});
  }
  {
    const auto geom = build_geometry(GeometryKind::coprime_extended, {4, 5});
    const auto sel = multifreq_sensor_selection(geom, hole_filling_plan(difference_coarray(geom)));
    CHECK(sel.sensors == std::vector<int>{0, 25, 30, 35});
    // chosen pairs reuse sensor 0 wherever redundancy allows
    CHECK(sel.annotated.entries[0].chosen_pair == std::pair{0, 25});
    CHECK(sel.annotated.entries[1].chosen_pair == std::pair{0, 30});
    CHECK(sel.annotated.entries[2].chosen_pair == std::pair{0, 30});
    CHECK(sel.annotated.entries[3].chosen_pair == std::pair{0, 35});
    // (4,5) second hole has three candidate pairs
    CHECK(sel.annotated.entries[0].candidate_pairs.size() == 3);
  }
  {
    const auto geom = build_geometry(GeometryKind::coprime_extended, {2, 3});
    const auto sel = multifreq_sensor_selection(geom, hole_filling_plan(difference_coarray(geom)));
    CHECK(sel.sensors == std::vector<int>{0, 9});
  }
}

TEST_CASE("sensor selection hits one third of the array for N = M + 1") {
  for (int M : {2, 3, 4, 5, 6}) {
    const int N = M + 1;
    CAPTURE(M, N);
    const auto geom = build_geometry(GeometryKind::coprime_extended, {M, N});
    const auto sel = multifreq_sensor_selection(geom, hole_filling_plan(difference_coarray(geom)));
    CHECK(static_cast<int>(sel.sensors.size()) == (geom.size() + 2) / 3);
  }
}

TEST_CASE("combined coarray lag counts") {
  const auto geom = build_geometry(GeometryKind::coprime_extended, {2, 3});
  const auto cc1 = combined_coarray(geom, {Rational(1), Rational(8, 9)});
  CHECK(cc1.unique_count() == 33);

  const auto cc2 = combined_coarray(geom, {Rational(1), Rational(2)});
  CHECK(cc2.positive_count() == 13);

  const auto cc3 = combined_coarray(geom, {Rational(1)});
  CHECK(cc3.unique_count() == difference_coarray(geom).unique_count());

  // coarray dilation: lag set at alpha equals alpha times the lag set at the
  // reference, exactly
  const auto base = difference_coarray(geom);
  const auto scaled = combined_coarray(geom, {Rational(8, 9)});
  REQUIRE(scaled.unique_count() == base.unique_count());
  for (int i = 0; i < base.unique_count(); ++i)
    CHECK(scaled.lags[i] == Rational(8, 9) * Rational(base.lags[i]));
}

TEST_CASE("virtual covariance dual frequency support") {
  const auto geom = build_geometry(GeometryKind::coprime_extended, {2, 3});
  auto scene = SourceScene::uniform_power({-40.0, 10.0, 55.0});
  scene.frequencies = {Rational(1), Rational(8, 9)};
  scene.powers = Eigen::MatrixXd::Ones(3, 2);
  std::vector<CovarianceMatrix> rbar;
  std::vector<ArrayGeometry> geoms{geom, geom};
  std::vector<Rational> ratios{Rational(1), Rational(8, 9)};
  for (int q = 0; q < 2; ++q) {
    const auto x = generate_snapshots(geom, scene, 800, 1.0, 50 + q, nullptr, ratios[q]);
    rbar.push_back(normalized_covariance(sample_covariance(x), geom.size()));
  }
  const auto vc = virtual_covariance(rbar, geoms, ratios);
  REQUIRE(vc.positions.size() == 10);  // filled ULA 0..9
  CHECK(vc.positions.front() == 0);
  CHECK(vc.positions.back() == 9);

  // support-enumeration oracle: every entry of the virtual support matrix is
  // matched by at least one (frequency, pair)
  for (int i = 0; i <= 9; ++i)
    for (int j = 0; j <= 9; ++j) {
      int matches = 0;
      for (int q = 0; q < 2; ++q)
        for (int a : geom.positions)
          for (int b : geom.positions)
            if (ratios[q] * Rational(a - b) == Rational(i - j)) ++matches;
      CAPTURE(i, j);
      CHECK(matches >= 1);
    }

  // without the second frequency, lag 8 is unfillable and must be named
  CHECK_THROWS_WITH(virtual_covariance({rbar[0]}, {geom}, {Rational(1)},
                                       VirtualCovarianceOptions{.extent = 9}),
                    Catch::Matchers::ContainsSubstring("8"));
}

TEST_CASE("single-frequency virtual covariance on a filled coarray equals augmentation") {
  const auto mra = build_geometry(GeometryKind::mra, {6});
  auto scene = SourceScene::uniform_power({-20.0, 30.0});
  const auto cov = sample_covariance(generate_snapshots(mra, scene, 300, 1.0, 8));
  const auto vc = virtual_covariance({cov}, {mra}, {Rational(1)});
  const MatrixC aug = augmented_covariance(cov, mra);
  REQUIRE(vc.values.rows() == aug.rows());
  CHECK((vc.values - aug).norm() < 1e-12);
}

TEST_CASE("dual-frequency music resolves nine proportional sources") {
  const auto geom = build_geometry(GeometryKind::coprime_extended, {2, 3});
  auto scene = SourceScene::uniform_power(u_grid_directions(-0.95, 0.95, 9));
  scene.frequencies = {Rational(1), Rational(8, 9)};
  scene.powers = Eigen::MatrixXd::Ones(9, 2);
  std::vector<SnapshotMatrix> snaps;
  for (int q = 0; q < 2; ++q)
    snaps.push_back(
        generate_snapshots(geom, scene, 2000, 1.0, 3000 + 7919 * q, nullptr, scene.frequencies[q]));

  const Grid grid = Grid::theta(-90, 90, 0.1);
  const auto est = find_peaks(multifreq_music_doa(snaps, 9, grid), 9);
  double sq = 0.0;
  for (double truth : scene.directions_deg) {
    const double err = nearest_error(est.angles_deg, truth);
    CHECK(err <= 0.5);
    sq += err * err;
  }
  CHECK(std::sqrt(sq / 9.0) <= 0.5);

  // zero-filled single-frequency baseline degrades hard
  const auto base = find_peaks(
      multifreq_music_doa({snaps[0]}, 9, grid,
                          VirtualCovarianceOptions{.extent = 9, .zero_fill_missing = true}),
      9);
  double base_sq = 0.0;
  for (double truth : scene.directions_deg) {
    const double err = nearest_error(base.angles_deg, truth);
    base_sq += err * err;
  }
  CHECK(std::sqrt(base_sq / 9.0) >= 1.5);

  // root-music variant agrees with the spectral peaks
  const auto rm = multifreq_root_music_doa(snaps, 9);
  REQUIRE(rm.angles_deg.size() == 9);
  for (double truth : scene.directions_deg) CHECK(nearest_error(rm.angles_deg, truth) <= 1.0);
}

TEST_CASE("dual-frequency sparse recovery of thirteen proportional sources") {
  const auto geom = build_geometry(GeometryKind::coprime_extended, {2, 3});
  auto scene = SourceScene::uniform_power(std::vector<double>{}, 10.0);
  for (int k = 0; k < 13; ++k) scene.directions_deg.push_back(-75.0 + 12.5 * k);
  scene.frequencies = {Rational(1), Rational(2)};
  scene.powers = Eigen::MatrixXd::Constant(13, 2, 10.0);
  scene.waveform_kind = WaveformKind::bpsk;
  std::vector<SnapshotMatrix> snaps;
  for (int q = 0; q < 2; ++q)
    snaps.push_back(
        generate_snapshots(geom, scene, 2000, 1.0, 300 + 7919 * q, nullptr, scene.frequencies[q]));
  const auto res = multifreq_sparse_doa(snaps, MultifreqSparseMode::proportional_single_vector,
                                        0.1, default_grid());
  const auto est = find_peaks(res.spectrum, 13);
  // half the sources sit half a bin off the 1-degree grid
  double sq = 0.0;
  for (double truth : scene.directions_deg) {
    const double err = nearest_error(est.angles_deg, truth);
    CHECK(err <= 2.0);
    sq += err * err;
  }
  CHECK(std::sqrt(sq / 13.0) <= 1.0);
}

TEST_CASE("group mode handles non-proportional spectra where single-vector fails") {
  const auto geom = build_geometry(GeometryKind::coprime_extended, {2, 3});
  auto scene = SourceScene::uniform_power(std::vector<double>{}, 10.0);
  for (int k = 0; k < 8; ++k) scene.directions_deg.push_back(-60.0 + 120.0 * k / 7.0);
  scene.frequencies = {Rational(1), Rational(2)};
  scene.powers.resize(8, 2);
  Rng rng(400);
  for (int d = 0; d < 8; ++d) {
    scene.powers(d, 0) = 10.0;
    scene.powers(d, 1) = std::pow(10.0, rng.uniform(0.0, 2.0));  // 0..20 dB
  }
  std::vector<SnapshotMatrix> snaps;
  for (int q = 0; q < 2; ++q)
    snaps.push_back(
        generate_snapshots(geom, scene, 2000, 1.0, 400 + 7919 * q, nullptr, scene.frequencies[q]));

  const auto grp = multifreq_sparse_doa(snaps, MultifreqSparseMode::group, 0.1, default_grid());
  const auto est = find_peaks(grp.spectrum, 8);
  double worst = 0.0;
  for (double truth : scene.directions_deg)
    worst = std::max(worst, nearest_error(est.angles_deg, truth));
  CHECK(worst <= 1.5);
  CHECK(grp.per_frequency.cols() == 2);

  // forcing the proportional single-vector model onto the same data misses
  // sources and produces spurious peaks
  const auto sv = multifreq_sparse_doa(snaps, MultifreqSparseMode::proportional_single_vector,
                                       0.25, default_grid());
  const auto est_sv = find_peaks(sv.spectrum, 8);
  double worst_sv = 0.0;
  for (double truth : scene.directions_deg)
    worst_sv = std::max(worst_sv, nearest_error(est_sv.angles_deg, truth));
  CHECK(worst_sv > 2.0);
}

TEST_CASE("resolvability bounds") {
  const auto b = multifreq_resolvable_bounds(2, 3, 2);
  CHECK(b.single_frequency_max == 8);
  CHECK(b.combined_upper_bound == 15);
}

TEST_CASE("frequency plan csv") {
  const auto geom = build_geometry(GeometryKind::coprime_extended, {2, 3});
  auto sel = multifreq_sensor_selection(geom, hole_filling_plan(difference_coarray(geom)));
  const std::string path = "plan_test.csv";
  sel.annotated.write_csv(path);
  std::ifstream is(path);
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  CHECK(header == "ratio_num,ratio_den,hole_lag,filler_lag,sensor_a,sensor_b");
  CHECK(row == "8,9,8,9,0,9");
  std::remove(path.c_str());
}
