#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace doalab {

/// Physical linear array: sorted integer element positions in units of the
/// unit spacing d0, plus d0 expressed in wavelengths at the reference
/// frequency (default half-wavelength).
struct ArrayGeometry {
  std::vector<int> positions;
  double unit_spacing_d0 = 0.5;

  ArrayGeometry() = default;
  explicit ArrayGeometry(std::vector<int> pos, double d0 = 0.5)
      : positions(std::move(pos)), unit_spacing_d0(d0) {
    std::sort(positions.begin(), positions.end());
    positions.erase(std::unique(positions.begin(), positions.end()), positions.end());
    if (positions.empty()) throw std::invalid_argument("ArrayGeometry: needs at least one element");
    if (positions.front() < 0) throw std::invalid_argument("ArrayGeometry: negative position");
  }

  int size() const { return static_cast<int>(positions.size()); }
  int aperture() const { return positions.back() - positions.front(); }

  /// One-line text form used by the CLI and config files.
  std::string serialize() const {
    std::ostringstream os;
    os << "d0=" << unit_spacing_d0 << "; pos=";
    for (std::size_t i = 0; i < positions.size(); ++i) {
      if (i) os << ",";
      os << positions[i];
    }
    return os.str();
  }

  static ArrayGeometry parse(const std::string& text) {
    double d0 = 0.5;
    std::vector<int> pos;
    std::istringstream is(text);
    std::string field;
    while (std::getline(is, field, ';')) {
      const auto eq = field.find('=');
      if (eq == std::string::npos) continue;
      std::string key = field.substr(0, eq);
      key.erase(std::remove_if(key.begin(), key.end(), ::isspace), key.end());
      std::string val = field.substr(eq + 1);
      if (key == "d0") {
        d0 = std::stod(val);
      } else if (key == "pos") {
        std::istringstream vs(val);
        std::string tok;
        while (std::getline(vs, tok, ',')) pos.push_back(std::stoi(tok));
      }
    }
    if (pos.empty()) throw std::invalid_argument("ArrayGeometry::parse: no positions in '" + text + "'");
    return ArrayGeometry(std::move(pos), d0);
  }
};

enum class CoarrayKind { difference, sum };

/// Virtual array of lags with per-lag pair counts, hole list, and the largest
/// L such that every lag in [-L, L] is present (difference-type only).
struct Coarray {
  CoarrayKind kind = CoarrayKind::difference;
  std::vector<int> lags;             // sorted unique
  std::map<int, int> weights;        // lag -> generating pair count
  std::vector<int> holes;            // positive lags only for difference type
  int contiguous_half_extent = 0;    // L; -1 when not a difference-type coarray

  int unique_count() const { return static_cast<int>(lags.size()); }
  int max_lag() const { return lags.back(); }
  int min_lag() const { return lags.front(); }
  bool contains(int lag) const { return weights.count(lag) != 0; }
  int weight(int lag) const {
    auto it = weights.find(lag);
    return it == weights.end() ? 0 : it->second;
  }

  /// Holes on both sides of zero (difference type) or within [min,max] (sum type).
  std::vector<int> holes_symmetric() const {
    if (kind != CoarrayKind::difference) return holes;
    std::vector<int> out;
    for (auto it = holes.rbegin(); it != holes.rend(); ++it) out.push_back(-*it);
    for (int h : holes) out.push_back(h);
    return out;
  }
};

namespace detail {

inline Coarray coarray_from_weights(std::map<int, int> w, CoarrayKind kind) {
  Coarray c;
  c.kind = kind;
  c.weights = std::move(w);
  c.lags.reserve(c.weights.size());
  for (const auto& [lag, cnt] : c.weights) c.lags.push_back(lag);
  const int lo = c.lags.front(), hi = c.lags.back();
  for (int l = lo; l <= hi; ++l) {
    if (!c.weights.count(l)) {
      if (kind == CoarrayKind::difference) {
        if (l > 0) c.holes.push_back(l);
      } else {
        c.holes.push_back(l);
      }
    }
  }
  if (kind == CoarrayKind::difference) {
    int L = 0;
    while (c.weights.count(L + 1) && c.weights.count(-(L + 1))) ++L;
    c.contiguous_half_extent = L;
  } else {
    c.contiguous_half_extent = -1;
  }
  return c;
}

}  // namespace detail

/// Set of all pairwise position differences with multiplicities (Eq-level
/// definition; weight(0) equals the element count).
inline Coarray difference_coarray(const ArrayGeometry& geom) {
  std::map<int, int> w;
  for (int a : geom.positions)
    for (int b : geom.positions) ++w[a - b];
  return detail::coarray_from_weights(std::move(w), CoarrayKind::difference);
}

/// One-sided sum coarray {t_m + r_n} of a transmit/receive pair.
inline Coarray sum_coarray(const ArrayGeometry& tx, const ArrayGeometry& rx) {
  std::map<int, int> w;
  for (int t : tx.positions)
    for (int r : rx.positions) ++w[t + r];
  return detail::coarray_from_weights(std::move(w), CoarrayKind::sum);
}

/// Difference coarray of the (unique) sum-coarray positions.
inline Coarray dcsc(const ArrayGeometry& tx, const ArrayGeometry& rx) {
  const Coarray sc = sum_coarray(tx, rx);
  return difference_coarray(ArrayGeometry(sc.lags, tx.unit_spacing_d0));
}

/// Closed-form structure of the extended co-prime coarray.
struct CoprimeClosedForms {
  int M = 0, N = 0;
  int sensor_count = 0;          // 2M + N - 1
  int coarray_unique_count = 0;  // 3MN + M - N
  int hole_count = 0;            // (M-1)(N-1)
  int first_hole_lag = 0;        // MN + M
  int filled_half_extent = 0;    // MN + M - 1
  int max_lag = 0;               // (2M-1)N
};

inline void require_coprime(int M, int N) {
  if (M < 1 || N < 1 || M >= N || std::gcd(M, N) != 1)
    throw std::invalid_argument("require gcd(M,N)=1 and 0<M<N, got M=" + std::to_string(M) +
                                " N=" + std::to_string(N));
}

inline CoprimeClosedForms coprime_closed_forms(int M, int N) {
  require_coprime(M, N);
  CoprimeClosedForms f;
  f.M = M;
  f.N = N;
  f.sensor_count = 2 * M + N - 1;
  f.coarray_unique_count = 3 * M * N + M - N;
  f.hole_count = (M - 1) * (N - 1);
  f.first_hole_lag = M * N + M;
  f.filled_half_extent = M * N + M - 1;
  f.max_lag = (2 * M - 1) * N;
  return f;
}

enum class GeometryKind { ula, coprime_basic, coprime_extended, nested, mra, mha };

namespace detail {

// Minimum redundancy arrays, transcribed lookup (these require exhaustive
// search to construct, so they are not re-derived here).
inline const std::map<int, std::vector<int>>& mra_table() {
  static const std::map<int, std::vector<int>> t = {
      {4, {0, 1, 4, 6}},
      {5, {0, 1, 4, 7, 9}},
      {6, {0, 1, 6, 9, 11, 13}},
      {8, {0, 1, 4, 10, 16, 18, 21, 23}},
      {10, {0, 1, 3, 6, 13, 20, 27, 31, 35, 36}},
  };
  return t;
}

// Minimum hole arrays (Golomb rulers); key = (elements, variant).
inline const std::map<std::pair<int, int>, std::vector<int>>& mha_table() {
  static const std::map<std::pair<int, int>, std::vector<int>> t = {
      {{5, 1}, {0, 1, 4, 9, 11}},
      {{6, 1}, {0, 1, 4, 10, 12, 17}},
      {{6, 2}, {0, 1, 4, 10, 15, 17}},
      {{6, 3}, {0, 1, 8, 11, 13, 17}},
      {{6, 4}, {0, 1, 8, 12, 14, 17}},
      {{8, 1}, {0, 1, 4, 9, 15, 22, 32, 34}},
      {{9, 1}, {0, 1, 5, 12, 25, 27, 35, 41, 44}},
      {{10, 1}, {0, 1, 6, 10, 23, 26, 34, 41, 53, 55}},
      {{12, 1}, {0, 2, 6, 24, 29, 40, 43, 55, 68, 75, 76, 85}},
  };
  return t;
}

inline std::string supported_sizes_message(const std::string& kind) {
  if (kind == "mra") {
    std::string s = "mra supports element counts:";
    for (const auto& [n, _] : mra_table()) s += " " + std::to_string(n);
    return s;
  }
  std::string s = "mha supports (elements[,variant]):";
  for (const auto& [key, _] : mha_table())
    s += " (" + std::to_string(key.first) + "," + std::to_string(key.second) + ")";
  return s;
}

inline std::vector<int> normalize_to_origin(std::vector<int> pos) {
  std::sort(pos.begin(), pos.end());
  pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
  const int base = pos.front();
  for (int& p : pos) p -= base;  // translation leaves every coarray invariant
  return pos;
}

}  // namespace detail

/// Build one of the supported array families. Parameters by kind:
///   ula:              params[0] = element count
///   coprime_basic:    params = {M, N}, positions {mN} U {nM}, m<M, n<N
///   coprime_extended: params = {M, N}, first ULA doubled (m < 2M)
///   nested:           params = {N1, N2} per the two-ULA construction
///   mra, mha:         params[0] = element count, optional params[1] = variant
inline ArrayGeometry build_geometry(GeometryKind kind, const std::vector<int>& params,
                                    double unit_spacing_d0 = 0.5) {
  switch (kind) {
    case GeometryKind::ula: {
      if (params.size() != 1 || params[0] < 1)
        throw std::invalid_argument("ula: expected one positive element count");
      std::vector<int> pos(params[0]);
      std::iota(pos.begin(), pos.end(), 0);
      return ArrayGeometry(std::move(pos), unit_spacing_d0);
    }
    case GeometryKind::coprime_basic:
    case GeometryKind::coprime_extended: {
      if (params.size() != 2) throw std::invalid_argument("coprime: expected {M, N}");
      const int M = params[0], N = params[1];
      require_coprime(M, N);
      const int m_count = (kind == GeometryKind::coprime_extended) ? 2 * M : M;
      std::set<int> pos;
      for (int m = 0; m < m_count; ++m) pos.insert(m * N);
      for (int n = 0; n < N; ++n) pos.insert(n * M);
      return ArrayGeometry(std::vector<int>(pos.begin(), pos.end()), unit_spacing_d0);
    }
    case GeometryKind::nested: {
      if (params.size() != 2 || params[0] < 1 || params[1] < 1)
        throw std::invalid_argument("nested: expected {N1, N2}");
      const int N1 = params[0], N2 = params[1];
      std::vector<int> pos;
      for (int n = 1; n <= N1; ++n) pos.push_back(n);
      for (int n = 1; n <= N2; ++n) pos.push_back((N1 + 1) * n);
      return ArrayGeometry(detail::normalize_to_origin(std::move(pos)), unit_spacing_d0);
    }
    case GeometryKind::mra: {
      if (params.empty()) throw std::invalid_argument("mra: expected element count");
      auto it = detail::mra_table().find(params[0]);
      if (it == detail::mra_table().end())
        throw std::invalid_argument("unsupported mra size " + std::to_string(params[0]) + "; " +
                                    detail::supported_sizes_message("mra"));
      return ArrayGeometry(it->second, unit_spacing_d0);
    }
    case GeometryKind::mha: {
      if (params.empty()) throw std::invalid_argument("mha: expected element count");
      const int variant = params.size() > 1 ? params[1] : 1;
      auto it = detail::mha_table().find({params[0], variant});
      if (it == detail::mha_table().end())
        throw std::invalid_argument("unsupported mha size/variant (" + std::to_string(params[0]) +
                                    "," + std::to_string(variant) + "); " +
                                    detail::supported_sizes_message("mha"));
      return ArrayGeometry(it->second, unit_spacing_d0);
    }
  }
  throw std::invalid_argument("build_geometry: unknown kind");
}

inline GeometryKind geometry_kind_from_string(const std::string& s) {
  if (s == "ula") return GeometryKind::ula;
  if (s == "coprime_basic") return GeometryKind::coprime_basic;
  if (s == "coprime_extended") return GeometryKind::coprime_extended;
  if (s == "nested") return GeometryKind::nested;
  if (s == "mra") return GeometryKind::mra;
  if (s == "mha") return GeometryKind::mha;
  throw std::invalid_argument("unknown geometry kind '" + s + "'");
}

}  // namespace doalab
