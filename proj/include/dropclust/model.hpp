#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dropclust/dataset.hpp"
#include "dropclust/design.hpp"

namespace dropclust {

enum class NaCause : std::uint8_t { None, Aliased, Separated };

std::string to_string(NaCause c);

/// Coefficients attached to one feature, stored over the full one-hot cells:
/// `beta` has L entries and `theta` has L * k entries indexed (level, cluster)
/// level-major. Continuous features use L = 1.
struct FeatureParams {
  VariableSchema variable;
  std::vector<double> beta;
  std::vector<double> theta;
  std::vector<NaCause> beta_na;
  std::vector<NaCause> theta_na;
  std::vector<double> beta_se;   // filled by the unpenalised fit only
  std::vector<double> theta_se;
  bool main_active = true;
  bool interaction_active = true;
  /// Standard deviation used to standardise a continuous feature (1 otherwise).
  double scale = 1.0;

  std::size_t levels() const { return variable.level_count(); }
  double theta_at(std::size_t level, std::size_t cluster, std::size_t k) const { return theta[level * k + cluster]; }
  bool has_na() const;
};

/// Interpretable model: intercept, feature main effects, cluster main effect
/// and feature x cluster interactions, in the parameterisation named by
/// `coding`.
struct ModelParams {
  Coding coding = Coding::SumToZero;
  std::size_t k = 1;
  double intercept = 0.0;
  NaCause intercept_na = NaCause::None;
  std::vector<double> gamma;
  std::vector<NaCause> gamma_na;
  std::vector<double> gamma_se;
  bool cluster_active = true;
  std::vector<FeatureParams> features;

  bool has_na() const;
  /// Linear predictor of one row; categorical cells hold level indices.
  double linear_predictor(std::span<const double> x, int cluster_label) const;
  /// Largest |sum| over any index of a categorical or interaction block.
  double sum_to_zero_violation() const;
  /// Strong hierarchy on the active flags and on the coefficient values.
  bool satisfies_hierarchy() const;
};

/// Exact reparameterisation to sum-to-zero blocks: interaction margins move to
/// the main effects, main-effect means move to the intercept. Requires no NA.
ModelParams canonicalize(const ModelParams& params);

/// Maps coefficients fitted on standardised continuous features back to
/// original units. Intercept and cluster effects absorb the centring.
ModelParams to_original_units(const ModelParams& params, const StandardizationReport& report);

/// Cells of a sum-to-zero block from its L-1 contrast coefficients: cell 0
/// (the reference) is minus the sum of the others.
std::vector<double> sum_to_zero_cells(std::span<const double> contrasts);
/// L x k interaction cells (level-major) from (L-1) x (k-1) contrasts.
std::vector<double> sum_to_zero_cells(std::span<const double> contrasts, std::size_t levels, std::size_t k);

nlohmann::json to_json(const ModelParams& params);
ModelParams model_params_from_json(const nlohmann::json& j);

}  // namespace dropclust
