#include <catch2/catch_amalgamated.hpp>

#include <numeric>
#include <set>

#include "doalab/geometry.hpp"

using namespace doalab;

namespace {

// Independent pairwise enumeration used as the oracle throughout.
std::set<int> brute_difference_set(const std::vector<int>& pos) {
  std::set<int> s;
  for (int a : pos)
    for (int b : pos) s.insert(a - b);
  return s;
}

std::set<int> brute_sum_set(const std::vector<int>& tx, const std::vector<int>& rx) {
  std::set<int> s;
  for (int t : tx)
    for (int r : rx) s.insert(t + r);
  return s;
}

}  // namespace

TEST_CASE("build_geometry known positions") {
  CHECK(build_geometry(GeometryKind::coprime_extended, {2, 3}).positions ==
        std::vector<int>{0, 2, 3, 4, 6, 9});
  CHECK(build_geometry(GeometryKind::coprime_basic, {2, 3}).positions ==
        std::vector<int>{0, 2, 3, 4});
  CHECK(build_geometry(GeometryKind::coprime_extended, {3, 5}).positions ==
        std::vector<int>{0, 3, 5, 6, 9, 10, 12, 15, 20, 25});
  CHECK(build_geometry(GeometryKind::mra, {6}).positions ==
        std::vector<int>{0, 1, 6, 9, 11, 13});
  CHECK(build_geometry(GeometryKind::nested, {3, 3}).positions ==
        std::vector<int>{0, 1, 2, 3, 7, 11});
  CHECK(build_geometry(GeometryKind::ula, {1}).positions == std::vector<int>{0});
  CHECK(build_geometry(GeometryKind::coprime_basic, {3, 4}).positions ==
        std::vector<int>{0, 3, 4, 6, 8, 9});
}

TEST_CASE("build_geometry rejects bad parameters") {
  CHECK_THROWS_AS(build_geometry(GeometryKind::coprime_extended, {2, 4}), std::invalid_argument);
  CHECK_THROWS_AS(build_geometry(GeometryKind::coprime_extended, {3, 2}), std::invalid_argument);
  CHECK_THROWS_AS(build_geometry(GeometryKind::mra, {7}), std::invalid_argument);
  CHECK_THROWS_AS(build_geometry(GeometryKind::mha, {7}), std::invalid_argument);
  CHECK_THROWS_WITH(build_geometry(GeometryKind::mra, {7}),
                    Catch::Matchers::ContainsSubstring("supports"));
}

TEST_CASE("difference coarray counts match the reference arrays") {
  // Four-element array [0,1,3,8]: 13 unique lags.
  const auto c1 = difference_coarray(ArrayGeometry({0, 1, 3, 8}));
  CHECK(c1.unique_count() == 13);

  // Extended co-prime (2,3): 17 lags, holes +-8, contiguous extent 7.
  const auto c2 = difference_coarray(build_geometry(GeometryKind::coprime_extended, {2, 3}));
  CHECK(c2.unique_count() == 17);
  CHECK(c2.holes == std::vector<int>{8});
  CHECK(c2.holes_symmetric() == std::vector<int>{-8, 8});
  CHECK(c2.contiguous_half_extent == 7);

  // Single element: lag 0 only.
  const auto c3 = difference_coarray(ArrayGeometry({0}));
  CHECK(c3.lags == std::vector<int>{0});
  CHECK(c3.weight(0) == 1);
  CHECK(c3.holes.empty());
}

TEST_CASE("difference coarray symmetry and weight invariants") {
  for (auto geom : {build_geometry(GeometryKind::coprime_extended, {3, 5}),
                    build_geometry(GeometryKind::mra, {8}),
                    build_geometry(GeometryKind::mha, {6, 2})}) {
    const auto c = difference_coarray(geom);
    int weight_sum = 0;
    for (const auto& [lag, w] : c.weights) {
      CHECK(c.weight(-lag) == w);
      weight_sum += w;
    }
    CHECK(weight_sum == geom.size() * geom.size());
    CHECK(c.weight(0) == geom.size());
    // holes and lags partition the span exactly
    CHECK(static_cast<int>(c.lags.size() + c.holes_symmetric().size()) ==
          c.max_lag() - c.min_lag() + 1);
  }
}

TEST_CASE("sum coarray examples") {
  const auto s1 = sum_coarray(ArrayGeometry({0, 1, 2}), ArrayGeometry({1, 4, 7}));
  CHECK(s1.unique_count() == 9);

  const auto s2 = sum_coarray(ArrayGeometry({0, 1, 3}), ArrayGeometry({0, 7}));
  CHECK(s2.lags == std::vector<int>{0, 1, 3, 7, 8, 10});

  const auto s3 = sum_coarray(ArrayGeometry({0}), ArrayGeometry({0}));
  CHECK(s3.lags == std::vector<int>{0});
}

TEST_CASE("dcsc equals difference coarray of sum positions") {
  const ArrayGeometry tx({0, 1, 3}), rx({0, 7});
  const auto d = dcsc(tx, rx);
  CHECK(d.unique_count() == 21);
  CHECK(d.max_lag() == 10);
  CHECK(d.holes.empty());
  CHECK(d.contiguous_half_extent == 10);

  // cross-checked by independent pairwise enumeration
  const auto sums = brute_sum_set(tx.positions, rx.positions);
  std::set<int> expect;
  for (int a : sums)
    for (int b : sums) expect.insert(a - b);
  CHECK(std::set<int>(d.lags.begin(), d.lags.end()) == expect);

  const auto d0 = dcsc(ArrayGeometry({0}), ArrayGeometry({0}));
  CHECK(d0.lags == std::vector<int>{0});
}

TEST_CASE("coprime closed forms against known values") {
  const auto f23 = coprime_closed_forms(2, 3);
  CHECK(f23.sensor_count == 6);
  CHECK(f23.coarray_unique_count == 17);
  CHECK(f23.hole_count == 2);
  CHECK(f23.first_hole_lag == 8);
  CHECK(f23.filled_half_extent == 7);

  const auto f57 = coprime_closed_forms(5, 7);
  CHECK(f57.max_lag == 63);
  CHECK(f57.hole_count == 24);
  CHECK(f57.filled_half_extent == 39);

  const auto f35 = coprime_closed_forms(3, 5);
  CHECK(f35.hole_count == 8);
  CHECK(f35.filled_half_extent == 17);
  CHECK(f35.max_lag == 25);

  CHECK_THROWS_AS(coprime_closed_forms(2, 4), std::invalid_argument);
}

TEST_CASE("closed forms agree with brute-force enumeration for all M<N<=9") {
  for (int M = 2; M <= 8; ++M) {
    for (int N = M + 1; N <= 9; ++N) {
      if (std::gcd(M, N) != 1) continue;
      CAPTURE(M, N);
      const auto geom = build_geometry(GeometryKind::coprime_extended, {M, N});
      const auto c = difference_coarray(geom);
      const auto f = coprime_closed_forms(M, N);
      CHECK(geom.size() == f.sensor_count);
      CHECK(c.unique_count() == f.coarray_unique_count);
      CHECK(static_cast<int>(c.holes_symmetric().size()) == f.hole_count);
      CHECK((c.holes.empty() ? -1 : c.holes.front()) ==
            (f.hole_count ? f.first_hole_lag : -1));
      CHECK(c.contiguous_half_extent == f.filled_half_extent);
      CHECK(c.max_lag() == f.max_lag);
      CHECK(std::set<int>(c.lags.begin(), c.lags.end()) ==
            brute_difference_set(geom.positions));
    }
  }
}

TEST_CASE("MHA difference coarrays have unit weights off zero") {
  for (auto key : {std::pair{5, 1}, {6, 1}, {6, 2}, {6, 3}, {6, 4}, {8, 1}, {9, 1}, {10, 1}, {12, 1}}) {
    CAPTURE(key.first, key.second);
    const auto c = difference_coarray(build_geometry(GeometryKind::mha, {key.first, key.second}));
    for (const auto& [lag, w] : c.weights)
      if (lag != 0) CHECK(w == 1);
  }
}

TEST_CASE("nested and MRA coarrays are hole-free") {
  for (int n : {4, 5, 6, 8, 10})
    CHECK(difference_coarray(build_geometry(GeometryKind::mra, {n})).holes.empty());
  for (auto p : {std::pair{2, 2}, {3, 3}, {4, 4}, {5, 5}, {2, 3}})
    CHECK(difference_coarray(build_geometry(GeometryKind::nested, {p.first, p.second})).holes.empty());
}

TEST_CASE("geometry serialization round trip") {
  const auto g = build_geometry(GeometryKind::coprime_extended, {2, 3});
  CHECK(g.serialize() == "d0=0.5; pos=0,2,3,4,6,9");
  const auto back = ArrayGeometry::parse(g.serialize());
  CHECK(back.positions == g.positions);
  CHECK(back.unit_spacing_d0 == g.unit_spacing_d0);
  CHECK_THROWS_AS(ArrayGeometry::parse("d0=0.5"), std::invalid_argument);
}

TEST_CASE("geometry invariants enforced") {
  CHECK_THROWS_AS(ArrayGeometry(std::vector<int>{}), std::invalid_argument);
  CHECK_THROWS_AS(ArrayGeometry({-1, 2}), std::invalid_argument);
  // duplicates collapse rather than error (builders dedup unions)
  CHECK(ArrayGeometry({3, 0, 3}).positions == std::vector<int>{0, 3});
}
