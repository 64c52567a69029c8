#include "dropclust/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "csv.hpp"
#include "dropclust/error.hpp"

namespace dropclust {

namespace {

std::string kind_name(VariableKind k) {
  return k == VariableKind::Continuous ? "continuous" : "categorical";
}

std::string role_name(VariableRole r) {
  switch (r) {
    case VariableRole::Feature: return "feature";
    case VariableRole::Outcome: return "outcome";
    case VariableRole::ClusterLabel: return "cluster-label";
  }
  return "feature";
}

std::optional<double> parse_number(const std::string& cell) {
  double v = 0.0;
  const char* b = cell.data();
  const char* e = b + cell.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string join_rows(const std::vector<std::size_t>& rows) {
  std::ostringstream os;
  for (std::size_t i = 0; i < rows.size() && i < 20; ++i) os << (i ? ", " : "") << rows[i];
  if (rows.size() > 20) os << ", ... (" << rows.size() << " rows)";
  return os.str();
}

struct HeaderMap {
  std::map<std::string, std::size_t> index;

  explicit HeaderMap(const std::vector<std::string>& header) {
    for (std::size_t c = 0; c < header.size(); ++c) index.emplace(header[c], c);
  }
  std::optional<std::size_t> find(const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end()) return std::nullopt;
    return it->second;
  }
};

// Feature order: continuous first, then categorical, declaration order within each.
std::vector<const VariableSchema*> ordered_features(const Schema& schema) {
  std::vector<const VariableSchema*> out;
  for (const auto& v : schema.variables)
    if (v.role == VariableRole::Feature && !v.is_categorical()) out.push_back(&v);
  for (const auto& v : schema.variables)
    if (v.role == VariableRole::Feature && v.is_categorical()) out.push_back(&v);
  return out;
}

}  // namespace

std::optional<std::size_t> VariableSchema::level_index(const std::string& label) const {
  auto it = std::find(levels.begin(), levels.end(), label);
  if (it == levels.end()) return std::nullopt;
  return static_cast<std::size_t>(it - levels.begin());
}

const VariableSchema& Schema::outcome() const {
  for (const auto& v : variables)
    if (v.role == VariableRole::Outcome) return v;
  fail_validation("schema declares no outcome variable");
}

void Schema::validate() const {
  std::set<std::string> names;
  std::size_t outcomes = 0, label_cols = 0, features = 0;
  for (const auto& v : variables) {
    if (v.name.empty()) fail_validation("schema variable with empty name");
    if (!names.insert(v.name).second) fail_validation("duplicate variable '" + v.name + "' in schema");
    if (v.is_categorical()) {
      if (v.levels.size() < 2)
        fail_validation("categorical variable '" + v.name + "' needs at least 2 levels");
      std::set<std::string> lv(v.levels.begin(), v.levels.end());
      if (lv.size() != v.levels.size())
        fail_validation("variable '" + v.name + "' has duplicate level labels");
    } else if (!v.levels.empty()) {
      fail_validation("continuous variable '" + v.name + "' must not declare levels");
    }
    switch (v.role) {
      case VariableRole::Outcome:
        ++outcomes;
        if (!v.is_categorical() || v.levels.size() != 2)
          fail_validation("outcome '" + v.name + "' must be categorical with exactly 2 levels");
        break;
      case VariableRole::ClusterLabel:
        ++label_cols;
        if (v.is_categorical()) fail_validation("cluster-label column must be declared continuous (integer labels)");
        break;
      case VariableRole::Feature: ++features; break;
    }
  }
  if (outcomes != 1) fail_validation("schema must declare exactly one outcome variable");
  if (label_cols > 1) fail_validation("schema declares more than one cluster-label column");
  if (features == 0) fail_validation("schema declares no feature variables");
  if (!event_level.empty() && !outcome().level_index(event_level))
    fail_validation("event level '" + event_level + "' is not an outcome level");
}

Schema parse_schema(const nlohmann::json& j) {
  Schema s;
  const nlohmann::json& vars = j.is_array() ? j : j.at("variables");
  for (const auto& item : vars) {
    VariableSchema v;
    v.name = item.at("name").get<std::string>();
    const auto kind = item.at("kind").get<std::string>();
    if (kind == "continuous") v.kind = VariableKind::Continuous;
    else if (kind == "categorical") v.kind = VariableKind::Categorical;
    else fail_validation("variable '" + v.name + "': unknown kind '" + kind + "'");
    if (item.contains("levels")) v.levels = item.at("levels").get<std::vector<std::string>>();
    const auto role = item.value("role", std::string("feature"));
    if (role == "feature") v.role = VariableRole::Feature;
    else if (role == "outcome") v.role = VariableRole::Outcome;
    else if (role == "cluster-label") v.role = VariableRole::ClusterLabel;
    else fail_validation("variable '" + v.name + "': unknown role '" + role + "'");
    if (v.role == VariableRole::Outcome && item.contains("event"))
      s.event_level = item.at("event").get<std::string>();
    s.variables.push_back(std::move(v));
  }
  if (j.is_object() && j.contains("event")) s.event_level = j.at("event").get<std::string>();
  s.validate();
  return s;
}

Schema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail_validation("cannot open schema file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail_validation("schema '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_schema(j);
}

nlohmann::json schema_to_json(const Schema& schema) {
  nlohmann::json vars = nlohmann::json::array();
  for (const auto& v : schema.variables) {
    nlohmann::json item = {{"name", v.name}, {"kind", kind_name(v.kind)}, {"role", role_name(v.role)}};
    if (v.is_categorical()) item["levels"] = v.levels;
    vars.push_back(item);
  }
  nlohmann::json j = {{"variables", vars}};
  if (!schema.event_level.empty()) j["event"] = schema.event_level;
  return j;
}

std::size_t Dataset::q() const {
  return static_cast<std::size_t>(std::count_if(features.begin(), features.end(),
                                                [](const auto& v) { return !v.is_categorical(); }));
}

std::optional<std::size_t> Dataset::feature_index(const std::string& name) const {
  for (std::size_t j = 0; j < features.size(); ++j)
    if (features[j].name == name) return j;
  return std::nullopt;
}

void Dataset::validate() const {
  const std::size_t rows = y.size();
  if (values.size() != features.size()) fail_validation("dataset column count mismatch");
  bool seen_cat = false;
  for (std::size_t j = 0; j < features.size(); ++j) {
    if (values[j].size() != rows) fail_validation("column '" + features[j].name + "' has wrong length");
    if (features[j].is_categorical()) {
      seen_cat = true;
      for (double v : values[j])
        if (v < 0 || v >= static_cast<double>(features[j].levels.size()) || v != std::floor(v))
          fail_validation("column '" + features[j].name + "' holds an invalid level code");
    } else {
      if (seen_cat) fail_validation("continuous features must precede categorical ones");
      for (double v : values[j])
        if (!std::isfinite(v)) fail_validation("column '" + features[j].name + "' holds a non-finite value");
    }
  }
  std::size_t ones = 0;
  for (int v : y) {
    if (v != 0 && v != 1) fail_validation("outcome must be binary");
    ones += static_cast<std::size_t>(v);
  }
  if (rows == 0) fail_validation("dataset has no rows");
  if (ones == 0 || ones == rows) fail_validation("outcome has one class");
  if (cluster_labels && cluster_labels->size() != rows) fail_validation("cluster label column has wrong length");
}

Dataset parse_csv(std::istream& in, const Schema& schema) {
  schema.validate();
  std::string line;
  if (!csv::getline(in, line)) fail_validation("CSV input is empty (header row expected)");
  const auto header = csv::split(line);
  HeaderMap hm(header);

  Dataset ds;
  const auto feats = ordered_features(schema);
  std::vector<std::size_t> feat_col;
  for (const auto* v : feats) {
    auto c = hm.find(v->name);
    if (!c) fail_validation("unknown column: schema variable '" + v->name + "' not found in CSV header");
    feat_col.push_back(*c);
    ds.features.push_back(*v);
  }
  const auto& outcome = schema.outcome();
  auto out_col = hm.find(outcome.name);
  if (!out_col) fail_validation("unknown column: outcome '" + outcome.name + "' not found in CSV header");
  ds.outcome = outcome;
  ds.event_index = schema.event_level.empty() ? 1 : *outcome.level_index(schema.event_level);

  std::optional<std::size_t> label_col;
  for (const auto& v : schema.variables) {
    if (v.role != VariableRole::ClusterLabel) continue;
    label_col = hm.find(v.name);
    if (!label_col) fail_validation("unknown column: cluster-label '" + v.name + "' not found in CSV header");
    ds.cluster_labels.emplace();
  }

  ds.values.assign(feats.size(), {});
  std::vector<std::size_t> missing_rows;
  std::vector<std::string> problems;
  std::size_t row = 0;
  while (csv::getline(in, line)) {
    if (csv::trim(line).empty()) continue;
    ++row;
    const auto cells = csv::split(line);
    auto cell = [&](std::size_t c) -> const std::string& {
      static const std::string empty;
      return c < cells.size() ? cells[c] : empty;
    };
    bool missing = false;
    for (std::size_t j = 0; j < feats.size(); ++j) {
      const auto& s = cell(feat_col[j]);
      if (csv::is_missing(s)) {
        missing = true;
        ds.values[j].push_back(0.0);
        continue;
      }
      if (feats[j]->is_categorical()) {
        auto idx = feats[j]->level_index(s);
        if (!idx) {
          problems.push_back("row " + std::to_string(row) + ": unseen level '" + s + "' for '" + feats[j]->name + "'");
          ds.values[j].push_back(0.0);
        } else {
          ds.values[j].push_back(static_cast<double>(*idx));
        }
      } else {
        auto v = parse_number(s);
        if (!v) {
          problems.push_back("row " + std::to_string(row) + ": non-numeric value '" + s + "' for '" + feats[j]->name + "'");
          ds.values[j].push_back(0.0);
        } else {
          ds.values[j].push_back(*v);
        }
      }
    }
    const auto& ys = cell(*out_col);
    if (csv::is_missing(ys)) {
      missing = true;
      ds.y.push_back(0);
    } else {
      auto idx = outcome.level_index(ys);
      if (!idx) {
        problems.push_back("row " + std::to_string(row) + ": non-binary outcome value '" + ys + "'");
        ds.y.push_back(0);
      } else {
        ds.y.push_back(*idx == ds.event_index ? 1 : 0);
      }
    }
    if (label_col) {
      const auto& ls = cell(*label_col);
      if (csv::is_missing(ls)) {
        missing = true;
        ds.cluster_labels->push_back(0);
      } else {
        auto v = parse_number(ls);
        if (!v || *v < 1 || *v != std::floor(*v)) {
          problems.push_back("row " + std::to_string(row) + ": invalid cluster label '" + ls + "'");
          ds.cluster_labels->push_back(0);
        } else {
          ds.cluster_labels->push_back(static_cast<int>(*v));
        }
      }
    }
    if (missing) missing_rows.push_back(row);
  }
  if (!missing_rows.empty())
    fail_validation("missing cell(s) in row(s) " + join_rows(missing_rows));
  if (!problems.empty()) {
    std::string msg = problems.front();
    if (problems.size() > 1) msg += " (and " + std::to_string(problems.size() - 1) + " more)";
    fail_validation(msg);
  }
  ds.validate();
  return ds;
}

Dataset load_csv(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) fail_validation("cannot open data file '" + path + "'");
  return parse_csv(in, schema);
}

namespace {
std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}
}  // namespace

void write_csv(std::ostream& out, const Dataset& ds) {
  for (const auto& f : ds.features) out << csv::quote(f.name) << ',';
  out << csv::quote(ds.outcome.name);
  if (ds.cluster_labels) out << ",cluster";
  out << '\n';
  const std::size_t other = ds.event_index == 0 ? 1 : 0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    for (std::size_t j = 0; j < ds.p(); ++j) {
      if (ds.features[j].is_categorical()) out << csv::quote(ds.features[j].levels[ds.level(i, j)]);
      else out << format_number(ds.value(i, j));
      out << ',';
    }
    out << csv::quote(ds.outcome.levels[ds.y[i] ? ds.event_index : other]);
    if (ds.cluster_labels) out << ',' << (*ds.cluster_labels)[i];
    out << '\n';
  }
}

Dataset subset_rows(const Dataset& ds, std::span<const std::size_t> rows) {
  Dataset out;
  out.features = ds.features;
  out.outcome = ds.outcome;
  out.event_index = ds.event_index;
  out.values.assign(ds.p(), {});
  for (std::size_t j = 0; j < ds.p(); ++j) {
    out.values[j].reserve(rows.size());
    for (auto r : rows) out.values[j].push_back(ds.values[j][r]);
  }
  out.y.reserve(rows.size());
  for (auto r : rows) out.y.push_back(ds.y[r]);
  if (ds.cluster_labels) {
    out.cluster_labels.emplace();
    for (auto r : rows) out.cluster_labels->push_back((*ds.cluster_labels)[r]);
  }
  return out;
}

std::string canonical_serialization(const Dataset& ds) {
  nlohmann::json j;
  nlohmann::json feats = nlohmann::json::array();
  for (std::size_t f = 0; f < ds.p(); ++f)
    feats.push_back({{"name", ds.features[f].name},
                     {"kind", kind_name(ds.features[f].kind)},
                     {"levels", ds.features[f].levels},
                     {"values", ds.values[f]}});
  j["features"] = feats;
  j["outcome"] = {{"name", ds.outcome.name}, {"levels", ds.outcome.levels}, {"event", ds.event_index}, {"y", ds.y}};
  if (ds.cluster_labels) j["cluster_labels"] = *ds.cluster_labels;
  return j.dump();
}

double StandardizationReport::scale_of(std::size_t j) const {
  for (std::size_t k = 0; k < feature.size(); ++k)
    if (feature[k] == j) return scale[k];
  return 1.0;
}

double StandardizationReport::center_of(std::size_t j) const {
  for (std::size_t k = 0; k < feature.size(); ++k)
    if (feature[k] == j) return center[k];
  return 0.0;
}

nlohmann::json to_json(const StandardizationReport& r) {
  return {{"feature", r.feature}, {"center", r.center}, {"scale", r.scale}};
}

StandardizationReport standardization_from_json(const nlohmann::json& j) {
  StandardizationReport r;
  r.feature = j.at("feature").get<std::vector<std::size_t>>();
  r.center = j.at("center").get<std::vector<double>>();
  r.scale = j.at("scale").get<std::vector<double>>();
  return r;
}

std::pair<Dataset, StandardizationReport> standardize_continuous(const Dataset& ds) {
  Dataset out = ds;
  StandardizationReport rep;
  const double n = static_cast<double>(ds.n());
  for (std::size_t j = 0; j < ds.p(); ++j) {
    if (ds.features[j].is_categorical()) continue;
    const auto& col = ds.values[j];
    double mean = 0.0;
    for (double v : col) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : col) ss += (v - mean) * (v - mean);
    const double sd = ds.n() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    if (!(sd > 0.0)) fail_validation("continuous feature '" + ds.features[j].name + "' has zero variance");
    for (double& v : out.values[j]) v = (v - mean) / sd;
    rep.feature.push_back(j);
    rep.center.push_back(mean);
    rep.scale.push_back(sd);
  }
  return {std::move(out), std::move(rep)};
}

Dataset destandardize(const Dataset& ds, const StandardizationReport& report) {
  Dataset out = ds;
  for (std::size_t k = 0; k < report.feature.size(); ++k)
    for (double& v : out.values[report.feature[k]]) v = v * report.scale[k] + report.center[k];
  return out;
}

ScoringRows parse_scoring_csv(std::istream& in, const Dataset& training) {
  std::string line;
  if (!csv::getline(in, line)) fail_validation("scoring CSV is empty (header row expected)");
  HeaderMap hm(csv::split(line));
  std::vector<std::size_t> cols;
  for (const auto& f : training.features) {
    auto c = hm.find(f.name);
    if (!c) fail_validation("unknown column: feature '" + f.name + "' not found in scoring CSV header");
    cols.push_back(*c);
  }
  const auto out_col = hm.find(training.outcome.name);

  ScoringRows rows;
  rows.values.assign(training.p(), {});
  std::size_t row = 0;
  while (csv::getline(in, line)) {
    if (csv::trim(line).empty()) continue;
    ++row;
    const auto cells = csv::split(line);
    std::string problem;
    for (std::size_t j = 0; j < training.p(); ++j) {
      const std::string s = cols[j] < cells.size() ? cells[cols[j]] : std::string();
      double v = 0.0;
      if (csv::is_missing(s)) {
        if (problem.empty()) problem = "missing value for '" + training.features[j].name + "'";
      } else if (training.features[j].is_categorical()) {
        auto idx = training.features[j].level_index(s);
        if (!idx) {
          if (problem.empty()) problem = "unseen level '" + s + "' for '" + training.features[j].name + "'";
        } else {
          v = static_cast<double>(*idx);
        }
      } else {
        auto num = parse_number(s);
        if (!num) {
          if (problem.empty()) problem = "non-numeric value for '" + training.features[j].name + "'";
        } else {
          v = *num;
        }
      }
      rows.values[j].push_back(v);
    }
    std::optional<int> y;
    if (out_col && *out_col < cells.size() && !csv::is_missing(cells[*out_col])) {
      auto idx = training.outcome.level_index(cells[*out_col]);
      if (idx) y = (*idx == training.event_index) ? 1 : 0;
      else if (problem.empty()) problem = "unknown outcome value '" + cells[*out_col] + "'";
    }
    rows.y.push_back(y);
    rows.problem.push_back(problem);
  }
  return rows;
}

ScoringRows load_scoring_csv(const std::string& path, const Dataset& training) {
  std::ifstream in(path);
  if (!in) fail_validation("cannot open scoring file '" + path + "'");
  return parse_scoring_csv(in, training);
}

}  // namespace dropclust
