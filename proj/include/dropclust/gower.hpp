#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "dropclust/dataset.hpp"

namespace dropclust {

/// Per-variable geometry of the Gower coefficient, fixed on the full data set
/// so that sub-samples and new points are measured on the same scale.
struct GowerGeometry {
  std::vector<bool> categorical;  // per feature
  std::vector<double> range;      // per feature; 0 for categorical
  bool include_outcome = true;

  static GowerGeometry fit(const Dataset& ds, bool include_outcome);
  std::size_t variable_count() const { return categorical.size() + (include_outcome ? 1 : 0); }
};

nlohmann::json to_json(const GowerGeometry& g);
GowerGeometry gower_geometry_from_json(const nlohmann::json& j);

/// Dense symmetric n x n matrix with a zero diagonal and entries in [0, 1].
class DissimilarityMatrix {
public:
  DissimilarityMatrix() = default;
  explicit DissimilarityMatrix(std::size_t n) : n_(n), values_(n * n, 0.0) {}

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
  double& at(std::size_t i, std::size_t j) { return values_[i * n_ + j]; }
  std::span<const double> row(std::size_t i) const { return {values_.data() + i * n_, n_}; }
  const std::vector<double>& values() const { return values_; }

  /// Restriction to `idx` (in the given order).
  DissimilarityMatrix submatrix(std::span<const std::size_t> idx) const;

  /// Ranges R_j that produced the matrix (empty for hand-built matrices).
  std::vector<double> ranges;

private:
  std::size_t n_ = 0;
  std::vector<double> values_;
};

/// Gower dissimilarity 1 - S over the p features plus, optionally, the outcome
/// treated as categorical. Rows are independent, so the kernel runs in
/// parallel; the result does not depend on the thread count.
DissimilarityMatrix gower_dissimilarity(const Dataset& ds, bool include_outcome = true);
DissimilarityMatrix gower_dissimilarity(const Dataset& ds, const GowerGeometry& geometry);

/// Single-threaded reference evaluating the similarity literally, then 1 - S.
DissimilarityMatrix gower_dissimilarity_serial(const Dataset& ds, const GowerGeometry& geometry);

/// Dissimilarities of one new point to every training row. When the outcome is
/// part of the geometry but `y` is absent, the outcome term is dropped and the
/// average runs over the remaining variables.
std::vector<double> gower_to_rows(const Dataset& training, const GowerGeometry& geometry,
                                  std::span<const double> point, std::optional<int> y);

/// Audit dump: "i,j,value" for the upper triangle including the diagonal.
void write_matrix_csv(std::ostream& out, const DissimilarityMatrix& m);

}  // namespace dropclust
