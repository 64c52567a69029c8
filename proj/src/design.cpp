#include "dropclust/design.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dropclust/error.hpp"

namespace dropclust {

GroupedDesign build_design(const Dataset& ds, std::span<const int> labels, std::size_t k) {
  if (labels.size() != ds.n()) fail_usage("cluster labels and data set have different lengths");
  if (k < 1) fail_usage("design needs k >= 1");
  std::vector<std::size_t> counts(k, 0);
  for (int l : labels) {
    if (l < 1 || static_cast<std::size_t>(l) > k)
      fail_validation("cluster label " + std::to_string(l) + " outside 1.." + std::to_string(k));
    ++counts[static_cast<std::size_t>(l - 1)];
  }

  GroupedDesign d;
  d.n = ds.n();
  d.k = k;
  const std::size_t p = ds.p();
  const double kk = static_cast<double>(k);

  std::size_t col = 1;  // column 0 is the intercept
  d.features.resize(p);
  for (std::size_t j = 0; j < p; ++j) {
    auto& f = d.features[j];
    f.categorical = ds.features[j].is_categorical();
    f.levels = ds.features[j].level_count();
    f.main = col;
    col += f.levels;
    d.variables.push_back(ds.features[j]);
  }
  d.cluster = col;
  col += k;
  for (std::size_t j = 0; j < p; ++j) {
    auto& f = d.features[j];
    f.copy_x = col;
    f.copy_c = f.copy_x + f.levels;
    f.xi = f.copy_c + k;
    f.end = f.xi + f.levels * k;
    col = f.end;
  }
  d.m = col;

  d.weight.assign(d.m, 1.0);
  for (auto& f : d.features) {
    for (std::size_t c = f.copy_x; c < f.copy_c; ++c) d.weight[c] = std::sqrt(kk);
    for (std::size_t c = f.copy_c; c < f.xi; ++c) d.weight[c] = std::sqrt(static_cast<double>(f.levels));
  }

  for (std::size_t j = 0; j < p; ++j) {
    d.features[j].main_group = d.groups.size();
    d.groups.push_back({BlockKind::Main, j, d.features[j].main, d.features[j].main + d.features[j].levels});
  }
  d.cluster_group = d.groups.size();
  d.groups.push_back({BlockKind::Cluster, 0, d.cluster, d.cluster + k});
  for (std::size_t j = 0; j < p; ++j) {
    d.features[j].composite_group = d.groups.size();
    d.groups.push_back({BlockKind::Composite, j, d.features[j].copy_x, d.features[j].end});
  }

  d.stride = 2 + 4 * p;
  d.cols.resize(d.n * d.stride);
  d.vals.resize(d.n * d.stride);
  for (std::size_t i = 0; i < d.n; ++i) {
    std::uint32_t* c = d.cols.data() + i * d.stride;
    double* v = d.vals.data() + i * d.stride;
    const auto s = static_cast<std::size_t>(labels[i] - 1);
    std::size_t e = 0;
    auto put = [&](std::size_t column, double raw) {
      c[e] = static_cast<std::uint32_t>(column);
      v[e] = raw / d.weight[column];
      ++e;
    };
    put(0, 1.0);
    for (std::size_t j = 0; j < p; ++j) {
      const auto& f = d.features[j];
      if (f.categorical) put(f.main + ds.level(i, j), 1.0);
      else put(f.main, ds.value(i, j));
    }
    put(d.cluster + s, 1.0);
    for (std::size_t j = 0; j < p; ++j) {
      const auto& f = d.features[j];
      const std::size_t a = f.categorical ? ds.level(i, j) : 0;
      const double x = f.categorical ? 1.0 : ds.value(i, j);
      put(f.copy_x + a, x);
      put(f.copy_c + s, 1.0);
      put(f.xi + a * k + s, x);
    }
  }

  for (std::size_t s = 0; s < k; ++s)
    if (counts[s] == 0)
      d.warnings.push_back("cluster " + std::to_string(s + 1) + " is empty; its one-hot column is all zero");

  // Collapse identical rows into patterns.
  std::vector<std::size_t> order(d.n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto less = [&](std::size_t a, std::size_t b) {
    const auto ca = d.row_cols(a), cb = d.row_cols(b);
    const auto va = d.row_vals(a), vb = d.row_vals(b);
    for (std::size_t e = 0; e < d.stride; ++e) {
      if (ca[e] != cb[e]) return ca[e] < cb[e];
      if (va[e] != vb[e]) return va[e] < vb[e];
    }
    return false;
  };
  std::stable_sort(order.begin(), order.end(), less);
  d.pattern.assign(d.n, 0);
  for (std::size_t r = 0; r < d.n; ++r) {
    if (r == 0 || less(order[r - 1], order[r])) d.pattern_row.push_back(order[r]);
    d.pattern[order[r]] = static_cast<std::uint32_t>(d.pattern_row.size() - 1);
  }
  return d;
}

Eigen::MatrixXd GroupedDesign::dense(bool folded) const {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = row_cols(i);
    const auto v = row_vals(i);
    for (std::size_t e = 0; e < stride; ++e)
      x(static_cast<Eigen::Index>(i), c[e]) += folded ? v[e] : v[e] * weight[c[e]];
  }
  return x;
}

nlohmann::json GroupedDesign::layout_json() const {
  nlohmann::json blocks = nlohmann::json::array();
  blocks.push_back({{"name", "intercept"}, {"begin", 0}, {"end", 1}, {"group", nullptr}, {"weight", 1.0}});
  for (std::size_t j = 0; j < features.size(); ++j) {
    const auto& f = features[j];
    blocks.push_back({{"name", "main:" + variables[j].name},
                      {"begin", f.main},
                      {"end", f.main + f.levels},
                      {"group", f.main_group},
                      {"weight", 1.0}});
  }
  blocks.push_back({{"name", "cluster"}, {"begin", cluster}, {"end", cluster + k}, {"group", cluster_group}, {"weight", 1.0}});
  for (std::size_t j = 0; j < features.size(); ++j) {
    const auto& f = features[j];
    const auto g = f.composite_group;
    blocks.push_back({{"name", "composite:" + variables[j].name + ":x_copy"},
                      {"begin", f.copy_x}, {"end", f.copy_c}, {"group", g}, {"weight", weight[f.copy_x]}});
    blocks.push_back({{"name", "composite:" + variables[j].name + ":cluster_copy"},
                      {"begin", f.copy_c}, {"end", f.xi}, {"group", g}, {"weight", weight[f.copy_c]}});
    blocks.push_back({{"name", "composite:" + variables[j].name + ":interaction"},
                      {"begin", f.xi}, {"end", f.end}, {"group", g}, {"weight", 1.0}});
  }
  return {{"n", n}, {"m", m}, {"k", k}, {"patterns", pattern_row.size()}, {"blocks", blocks}, {"warnings", warnings}};
}

std::vector<double> level_code(std::size_t level, std::size_t levels, Coding coding) {
  if (levels < 2) fail_usage("contrast coding needs at least 2 levels");
  if (level >= levels) fail_usage("level index out of range");
  if (coding == Coding::OneHot) fail_usage("one-hot parameters have no contrast code; canonicalize first");
  std::vector<double> code(levels - 1, 0.0);
  if (level == 0) {
    if (coding == Coding::SumToZero) std::fill(code.begin(), code.end(), -1.0);
  } else {
    code[level - 1] = 1.0;
  }
  return code;
}

namespace {

ContrastRow combine(std::vector<double> main, int cluster_label, std::size_t k, Coding coding) {
  ContrastRow row;
  row.main = std::move(main);
  if (k >= 2) {
    if (cluster_label < 1 || static_cast<std::size_t>(cluster_label) > k)
      fail_usage("cluster label outside 1..k");
    row.cluster = level_code(static_cast<std::size_t>(cluster_label - 1), k, coding);
  }
  for (double a : row.main)
    for (double b : row.cluster) row.interaction.push_back(a * b);
  return row;
}

}  // namespace

ContrastRow fcode_row(const VariableSchema& var, std::size_t level, int cluster_label, std::size_t k, Coding coding) {
  if (!var.is_categorical()) fail_usage("variable '" + var.name + "' is continuous; use fcode_row_continuous");
  if (level >= var.levels.size()) fail_usage("unknown level index for '" + var.name + "'");
  return combine(level_code(level, var.levels.size(), coding), cluster_label, k, coding);
}

ContrastRow fcode_row(const VariableSchema& var, const std::string& level, int cluster_label, std::size_t k,
                      Coding coding) {
  auto idx = var.level_index(level);
  if (!idx) fail_usage("unknown level '" + level + "' for variable '" + var.name + "'");
  return fcode_row(var, *idx, cluster_label, k, coding);
}

ContrastRow fcode_row_continuous(double value, int cluster_label, std::size_t k, Coding coding) {
  return combine({value}, cluster_label, k, coding);
}

}  // namespace dropclust
