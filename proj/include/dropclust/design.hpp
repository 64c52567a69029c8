#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dropclust/dataset.hpp"

namespace dropclust {

enum class BlockKind { Intercept, Main, Cluster, Composite };

/// A contiguous run of design columns that is penalised as one group.
struct PenaltyGroup {
  BlockKind kind;
  std::size_t feature = 0;  // Main / Composite only
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

/// Column spans belonging to one feature.
struct FeatureColumns {
  std::size_t levels = 1;       // L_j (1 for continuous)
  bool categorical = false;
  std::size_t main = 0;         // L_j columns
  std::size_t copy_x = 0;       // L_j columns, weight sqrt(k)
  std::size_t copy_c = 0;       // k columns, weight sqrt(L_j)
  std::size_t xi = 0;           // L_j * k columns, (level, cluster) row-major
  std::size_t end = 0;          // one past the composite
  std::size_t main_group = 0;
  std::size_t composite_group = 0;
};

/// Expanded design: intercept, main blocks in feature order, the cluster
/// block, then one composite [X_j copy | C copy | X_j * C] per feature.
///
/// Every row has the same number of non-zeros, so rows are stored as a fixed
/// stride of (column, value) pairs. Values are already divided by the column
/// weight; a coefficient c on a folded column corresponds to c / weight on the
/// raw column, which turns the composite penalty into a plain group norm.
struct GroupedDesign {
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t k = 0;
  std::size_t stride = 0;
  std::vector<std::uint32_t> cols;
  std::vector<double> vals;
  std::vector<double> weight;           // per column
  std::vector<FeatureColumns> features;
  std::size_t cluster = 0;              // first column of the cluster block
  std::size_t cluster_group = 0;
  std::vector<PenaltyGroup> groups;
  std::vector<VariableSchema> variables;
  std::vector<std::string> warnings;

  /// Identical design rows share a pattern id; used to collapse weighted data.
  std::vector<std::uint32_t> pattern;
  std::vector<std::size_t> pattern_row;  // representative row per pattern

  std::span<const std::uint32_t> row_cols(std::size_t i) const { return {cols.data() + i * stride, stride}; }
  std::span<const double> row_vals(std::size_t i) const { return {vals.data() + i * stride, stride}; }

  /// Dense n x m matrix, folded (solver space) or with raw one-hot/product values.
  Eigen::MatrixXd dense(bool folded = true) const;
  nlohmann::json layout_json() const;
};

/// Builds the expanded design for cluster labels in 1..k.
GroupedDesign build_design(const Dataset& ds, std::span<const int> labels, std::size_t k);

/// Parameterisations of categorical blocks. OneHot is the unconstrained
/// one-hot form returned directly by the expanded predictor.
enum class Coding { SumToZero, Reference, OneHot };

/// Contrast codes of one level among L: under sum-to-zero coding the
/// reference level maps to (-1, ..., -1) and level r >= 1 to the unit vector
/// e_r; under reference (dummy) coding the reference level maps to zeros.
std::vector<double> level_code(std::size_t level, std::size_t levels, Coding coding = Coding::SumToZero);

/// Main-effect, cluster and induced interaction contrasts of one cell.
struct ContrastRow {
  std::vector<double> main;         // L-1 entries (1 for continuous: the value)
  std::vector<double> cluster;      // k-1 entries
  std::vector<double> interaction;  // (L-1) x (k-1), row-major by level
};

ContrastRow fcode_row(const VariableSchema& var, const std::string& level, int cluster_label, std::size_t k,
                      Coding coding = Coding::SumToZero);
ContrastRow fcode_row(const VariableSchema& var, std::size_t level, int cluster_label, std::size_t k,
                      Coding coding = Coding::SumToZero);
/// Continuous variable evaluated at `value`.
ContrastRow fcode_row_continuous(double value, int cluster_label, std::size_t k, Coding coding = Coding::SumToZero);

}  // namespace dropclust
