#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "dropclust/model.hpp"

namespace dropclust {

/// Odds ratios of one feature level (or a unit increase) in every cluster,
/// and ratios of odds ratios against the reference cluster (cluster 1).
struct EffectEstimate {
  std::string variable;
  std::size_t feature = 0;
  std::string level;             // "unit increase" for continuous features
  std::size_t level_index = 0;
  bool continuous = false;
  std::string formula_tag;
  std::vector<double> log_or;    // per cluster; NaN when not estimable
  std::vector<NaCause> na;       // per cluster
  std::vector<double> log_ror;   // per cluster; entry 0 is 0 by definition

  std::size_t clusters() const { return log_or.size(); }
  double odds_ratio(std::size_t s) const;
  double ror(std::size_t s) const;
};

/// logit(level | cluster) - logit(reference | cluster), the remaining
/// covariates held fixed. Sum-to-zero parameters are evaluated through their
/// contrast codes; other codings through the one-hot cells. Continuous
/// features use a unit increase. Returns NaN when an NA coefficient is involved.
double conditional_log_or(const ModelParams& params, std::size_t feature, std::size_t level, int cluster_label);

/// Which closed-form case describes the effect, e.g. "k=2:binary".
std::string formula_tag(const ModelParams& params, std::size_t feature);

/// One row per feature and non-reference level (one per continuous feature).
/// With `standardized_units` continuous effects are per standard deviation.
std::vector<EffectEstimate> effect_table(const ModelParams& params, bool standardized_units = false);

/// or_b / or_a.
double ror_from_ors(double or_a, double or_b);

/// Reading of a ratio of odds ratios, e.g. "approximately 11% stronger".
std::string interpret_ror(double ror);
/// Sentence for the effect in cluster `s` relative to the reference cluster.
std::string interpret(const EffectEstimate& effect, std::size_t s);

nlohmann::json to_json(const std::vector<EffectEstimate>& table);
void write_effects_csv(std::ostream& out, const std::vector<EffectEstimate>& table);

}  // namespace dropclust
