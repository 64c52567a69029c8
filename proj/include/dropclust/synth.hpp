#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "dropclust/dataset.hpp"
#include "dropclust/model.hpp"

namespace dropclust {

/// Per-cluster generator of one feature: a normal (optionally rounded) for
/// continuous features, level probabilities for categorical ones.
struct FeatureGenerator {
  VariableSchema variable;
  std::vector<double> mean;                 // per cluster
  std::vector<double> sd;                   // per cluster
  int decimals = -1;                        // rounding; -1 keeps full precision
  std::vector<std::vector<double>> probs;   // per cluster, per level
};

/// Mixture of k clusters with a logistic outcome. True coefficients are
/// given as sum-to-zero contrasts: beta has L-1 entries (1 for continuous),
/// theta (L-1)(k-1) entries (k-1 for continuous), gamma k-1 entries.
struct SyntheticSpec {
  std::size_t n = 1000;
  std::size_t k = 2;
  std::vector<double> weights;
  VariableSchema outcome;
  std::vector<FeatureGenerator> features;
  double intercept = 0.0;
  std::vector<double> gamma;
  std::map<std::string, std::vector<double>> beta;
  std::map<std::string, std::vector<double>> theta;

  void validate() const;
  /// True parameters in sum-to-zero cell form, features ordered continuous first.
  ModelParams truth() const;
};

SyntheticSpec parse_synthetic_spec(const nlohmann::json& j);
nlohmann::json to_json(const SyntheticSpec& spec);

struct SyntheticData {
  Schema schema;
  Dataset data;       // carries the generating cluster labels
  ModelParams truth;
};

/// Draws clusters, features and outcomes. Same spec and seed give the same data.
SyntheticData synthesize(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace dropclust
