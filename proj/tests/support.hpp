#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dropclust/dataset.hpp"
#include "dropclust/random.hpp"

namespace testsupport {

using namespace dropclust;

inline VariableSchema continuous(const std::string& name) {
  VariableSchema v;
  v.name = name;
  return v;
}

inline VariableSchema categorical(const std::string& name, std::vector<std::string> levels) {
  VariableSchema v;
  v.name = name;
  v.kind = VariableKind::Categorical;
  v.levels = std::move(levels);
  return v;
}

inline VariableSchema binary_outcome() {
  VariableSchema v = categorical("y", {"no", "yes"});
  v.role = VariableRole::Outcome;
  return v;
}

/// Random mixed data: `cont` continuous features then categorical ones with
/// the given level counts; outcome from an arbitrary logistic model.
inline Dataset random_dataset(std::size_t n, std::size_t cont, const std::vector<std::size_t>& levels,
                              std::uint64_t seed) {
  Rng rng(seed);
  Dataset ds;
  for (std::size_t j = 0; j < cont; ++j) ds.features.push_back(continuous("x" + std::to_string(j)));
  for (std::size_t j = 0; j < levels.size(); ++j) {
    std::vector<std::string> lv;
    for (std::size_t l = 0; l < levels[j]; ++l) lv.push_back("l" + std::to_string(l));
    ds.features.push_back(categorical("c" + std::to_string(j), lv));
  }
  ds.outcome = binary_outcome();
  ds.values.assign(ds.features.size(), std::vector<double>(n));
  ds.y.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    double eta = -0.2;
    for (std::size_t j = 0; j < cont; ++j) {
      ds.values[j][i] = 3.0 + 2.0 * rng.normal();
      eta += 0.3 * (ds.values[j][i] - 3.0) / 2.0;
    }
    for (std::size_t j = 0; j < levels.size(); ++j) {
      const auto l = rng.below(levels[j]);
      ds.values[cont + j][i] = static_cast<double>(l);
      eta += l == 1 ? 0.5 : 0.0;
    }
    ds.y[i] = rng.bernoulli(1.0 / (1.0 + std::exp(-eta))) ? 1 : 0;
  }
  ds.y[0] = 0;
  ds.y[1] = 1;
  return ds;
}

inline std::vector<int> random_labels(std::size_t n, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> l(n);
  for (std::size_t i = 0; i < n; ++i) l[i] = static_cast<int>(i < k ? i : rng.below(k)) + 1;
  return l;
}

}  // namespace testsupport
