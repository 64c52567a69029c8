#include "dropclust/gower.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "dropclust/error.hpp"

namespace dropclust {

GowerGeometry GowerGeometry::fit(const Dataset& ds, bool include_outcome) {
  if (ds.n() < 2) fail_validation("Gower dissimilarity needs at least 2 rows");
  GowerGeometry g;
  g.include_outcome = include_outcome;
  for (std::size_t j = 0; j < ds.p(); ++j) {
    const bool cat = ds.features[j].is_categorical();
    g.categorical.push_back(cat);
    if (cat) {
      g.range.push_back(0.0);
      continue;
    }
    const auto [lo, hi] = std::minmax_element(ds.values[j].begin(), ds.values[j].end());
    const double r = *hi - *lo;
    if (!(r > 0.0)) fail_validation("continuous feature '" + ds.features[j].name + "' has zero range");
    g.range.push_back(r);
  }
  return g;
}

nlohmann::json to_json(const GowerGeometry& g) {
  return {{"categorical", g.categorical}, {"range", g.range}, {"include_outcome", g.include_outcome}};
}

GowerGeometry gower_geometry_from_json(const nlohmann::json& j) {
  GowerGeometry g;
  g.categorical = j.at("categorical").get<std::vector<bool>>();
  g.range = j.at("range").get<std::vector<double>>();
  g.include_outcome = j.at("include_outcome").get<bool>();
  return g;
}

DissimilarityMatrix DissimilarityMatrix::submatrix(std::span<const std::size_t> idx) const {
  DissimilarityMatrix out(idx.size());
  for (std::size_t a = 0; a < idx.size(); ++a) {
    const double* src = values_.data() + idx[a] * n_;
    double* dst = out.values_.data() + a * idx.size();
    for (std::size_t b = 0; b < idx.size(); ++b) dst[b] = src[idx[b]];
  }
  out.ranges = ranges;
  return out;
}

namespace {

void check_geometry(const Dataset& ds, const GowerGeometry& g) {
  if (ds.n() < 2) fail_validation("Gower dissimilarity needs at least 2 rows");
  if (g.categorical.size() != ds.p()) fail_validation("Gower geometry does not match the data set");
  for (std::size_t j = 0; j < ds.p(); ++j)
    if (!g.categorical[j] && !(g.range[j] > 0.0))
      fail_validation("continuous feature '" + ds.features[j].name + "' has zero range");
}

}  // namespace

DissimilarityMatrix gower_dissimilarity(const Dataset& ds, bool include_outcome) {
  return gower_dissimilarity(ds, GowerGeometry::fit(ds, include_outcome));
}

DissimilarityMatrix gower_dissimilarity(const Dataset& ds, const GowerGeometry& g) {
  check_geometry(ds, g);
  const std::size_t n = ds.n();
  const std::size_t p = ds.p();
  const double vars = static_cast<double>(g.variable_count());
  std::vector<double> inv_range(p, 0.0);
  for (std::size_t j = 0; j < p; ++j)
    if (!g.categorical[j]) inv_range[j] = 1.0 / g.range[j];

  DissimilarityMatrix m(n);
  // Each (i, j > i) entry is written by exactly one iteration; accumulation
  // order inside an entry is fixed, so the thread count cannot change bits.
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t si = 0; si < static_cast<std::ptrdiff_t>(n); ++si) {
    const auto i = static_cast<std::size_t>(si);
    for (std::size_t k = i + 1; k < n; ++k) {
      double d = 0.0;
      for (std::size_t j = 0; j < p; ++j) {
        const double a = ds.values[j][i];
        const double b = ds.values[j][k];
        d += g.categorical[j] ? (a == b ? 0.0 : 1.0) : std::abs(a - b) * inv_range[j];
      }
      if (g.include_outcome && ds.y[i] != ds.y[k]) d += 1.0;
      d = std::min(1.0, d / vars);
      m.at(i, k) = d;
      m.at(k, i) = d;
    }
  }
  m.ranges = g.range;
  return m;
}

DissimilarityMatrix gower_dissimilarity_serial(const Dataset& ds, const GowerGeometry& g) {
  check_geometry(ds, g);
  const std::size_t n = ds.n();
  const double vars = static_cast<double>(g.variable_count());
  DissimilarityMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      if (i == k) continue;
      double s = 0.0;
      for (std::size_t j = 0; j < ds.p(); ++j) {
        const double a = ds.values[j][i];
        const double b = ds.values[j][k];
        if (g.categorical[j]) s += (a == b) ? 1.0 : 0.0;
        else s += 1.0 - std::abs(a - b) / g.range[j];
      }
      if (g.include_outcome) s += (ds.y[i] == ds.y[k]) ? 1.0 : 0.0;
      m.at(i, k) = 1.0 - s / vars;
    }
  }
  m.ranges = g.range;
  return m;
}

std::vector<double> gower_to_rows(const Dataset& training, const GowerGeometry& g,
                                  std::span<const double> point, std::optional<int> y) {
  if (point.size() != training.p()) fail_validation("new point has the wrong number of features");
  const bool use_outcome = g.include_outcome && y.has_value();
  const double vars = static_cast<double>(training.p() + (use_outcome ? 1 : 0));
  std::vector<double> out(training.n(), 0.0);
  for (std::size_t i = 0; i < training.n(); ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < training.p(); ++j) {
      const double a = training.values[j][i];
      if (g.categorical[j]) d += (a == point[j]) ? 0.0 : 1.0;
      else d += std::min(1.0, std::abs(a - point[j]) / g.range[j]);
    }
    if (use_outcome && training.y[i] != *y) d += 1.0;
    out[i] = std::min(1.0, d / vars);
  }
  return out;
}

void write_matrix_csv(std::ostream& out, const DissimilarityMatrix& m) {
  out << "i,j,value\n";
  out.precision(17);
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = i; j < m.size(); ++j) out << i << ',' << j << ',' << m(i, j) << '\n';
}

}  // namespace dropclust
