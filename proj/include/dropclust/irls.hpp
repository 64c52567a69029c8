#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dropclust/dataset.hpp"
#include "dropclust/model.hpp"

namespace dropclust {

struct IrlsOptions {
  int max_iter = 100;
  double tol = 1e-13;             // relative deviance change
  double alias_tol = 1e-9;        // relative pivot size below which a column is aliased
  double separation_bound = 30.0; // |coefficient| beyond this is reported as separated
};

struct IrlsResult {
  ModelParams params;             // reference coding
  double deviance = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> columns;
};

/// Unpenalised maximum likelihood by Newton-IRLS on the dummy-coded design:
/// intercept, features, cluster indicators 2..k and, optionally, every
/// feature x cluster product. Aliased columns are dropped and reported as NA;
/// coefficients that diverge past the separation bound are reported as NA.
/// With k = 1 the labels are ignored and no cluster terms are fitted.
IrlsResult fit_unpenalized(const Dataset& ds, std::span<const int> labels, std::size_t k, bool include_interactions,
                           const IrlsOptions& opts = {});

}  // namespace dropclust
