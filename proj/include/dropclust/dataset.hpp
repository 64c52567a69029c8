#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace dropclust {

enum class VariableKind { Continuous, Categorical };
enum class VariableRole { Feature, Outcome, ClusterLabel };

/// One column of the input table. For categorical variables the first
/// listed level is the reference level.
struct VariableSchema {
  std::string name;
  VariableKind kind = VariableKind::Continuous;
  std::vector<std::string> levels;
  VariableRole role = VariableRole::Feature;

  bool is_categorical() const { return kind == VariableKind::Categorical; }
  std::size_t level_count() const { return is_categorical() ? levels.size() : 1; }
  std::optional<std::size_t> level_index(const std::string& label) const;
};

/// Declared schema as read from the sidecar file.
struct Schema {
  std::vector<VariableSchema> variables;
  /// Outcome label coded as 1. Empty means the second listed outcome level.
  std::string event_level;

  void validate() const;
  const VariableSchema& outcome() const;
};

Schema parse_schema(const nlohmann::json& j);
Schema load_schema(const std::string& path);
nlohmann::json schema_to_json(const Schema& schema);

/// Mixed-type rows with a binary outcome. Features are stored column-wise,
/// continuous variables first (in declaration order), then categorical ones.
/// Categorical cells hold the 0-based level index.
struct Dataset {
  std::vector<VariableSchema> features;
  VariableSchema outcome;
  std::size_t event_index = 1;
  std::vector<std::vector<double>> values;
  std::vector<int> y;
  /// Present when the schema declares a cluster-label column (labels 1..k).
  std::optional<std::vector<int>> cluster_labels;

  std::size_t n() const { return y.size(); }
  std::size_t p() const { return features.size(); }
  std::size_t q() const;

  double value(std::size_t row, std::size_t feature) const { return values[feature][row]; }
  std::size_t level(std::size_t row, std::size_t feature) const {
    return static_cast<std::size_t>(values[feature][row]);
  }
  std::optional<std::size_t> feature_index(const std::string& name) const;

  /// Throws a validation error when an invariant does not hold.
  void validate() const;
};

Dataset parse_csv(std::istream& in, const Schema& schema);
Dataset load_csv(const std::string& path, const Schema& schema);
void write_csv(std::ostream& out, const Dataset& ds);

/// Rows in `rows` order (duplicates allowed).
Dataset subset_rows(const Dataset& ds, std::span<const std::size_t> rows);

/// Canonical serialization used for determinism checks.
std::string canonical_serialization(const Dataset& ds);

struct StandardizationReport {
  std::vector<std::size_t> feature;  // indices into Dataset::features
  std::vector<double> center;
  std::vector<double> scale;

  /// Scale of feature `j`, or 1 when it was not standardized.
  double scale_of(std::size_t j) const;
  double center_of(std::size_t j) const;
};

nlohmann::json to_json(const StandardizationReport& r);
StandardizationReport standardization_from_json(const nlohmann::json& j);

/// (x - mean) / sd on every continuous feature; sd uses the n-1 divisor.
std::pair<Dataset, StandardizationReport> standardize_continuous(const Dataset& ds);
Dataset destandardize(const Dataset& ds, const StandardizationReport& report);

/// Rows offered for scoring. The outcome column is optional; rows with
/// unseen levels or missing cells are kept but flagged.
struct ScoringRows {
  std::vector<std::vector<double>> values;  // same feature order as the training Dataset
  std::vector<std::optional<int>> y;
  std::vector<std::string> problem;         // empty when the row is scorable
  std::size_t size() const { return problem.size(); }
};

ScoringRows parse_scoring_csv(std::istream& in, const Dataset& training);
ScoringRows load_scoring_csv(const std::string& path, const Dataset& training);

}  // namespace dropclust
