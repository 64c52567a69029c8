#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dropclust/dataset.hpp"
#include "dropclust/effects.hpp"
#include "dropclust/glasso.hpp"
#include "dropclust/gower.hpp"
#include "dropclust/model.hpp"

namespace dropclust {

struct BcaInterval {
  double lower = 0.0;
  double upper = 0.0;
  double z0 = 0.0;
  double a = 0.0;
  bool degenerate = false;
  std::string warning;
};

/// Bias-corrected and accelerated percentile interval at level 1 - alpha.
/// z0 counts replicates below the point estimate (ties count one half); the
/// acceleration comes from the jackknife values. Endpoints are type-7
/// quantiles, so they never leave the replicate range.
BcaInterval bca_interval(std::span<const double> replicates, double point, double alpha,
                         std::span<const double> jackknife);

/// Same interval with z0 and a supplied directly.
BcaInterval bca_interval_with(std::span<const double> replicates, double alpha, double z0, double a);

/// Plain percentile interval.
std::pair<double, double> percentile_interval(std::span<const double> replicates, double alpha);

/// Type-7 quantile of sorted values.
double quantile_sorted(std::span<const double> sorted, double prob);

double normal_cdf(double z);
double normal_quantile(double p);

/// Acceleration a from jackknife (or grouped jackknife) values.
double jackknife_acceleration(std::span<const double> jackknife);

struct BootstrapOptions {
  std::size_t replicates = 1000;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  CvOptions cv;                        // repeats default to 1 inside the loop
  std::size_t jackknife_groups = 20;
  bool recluster_per_replicate = false;
  std::size_t recluster_restarts = 5;
  bool standardized_units = false;
  std::size_t max_redraws = 1000;
  bool keep_replicates = true;

  BootstrapOptions() { cv.repeats = 1; }
};

/// What the pipeline needs to refit on a resample: the standardized data,
/// its cluster labels and, for re-clustering, the dissimilarity matrix.
struct BootstrapInput {
  const Dataset* data = nullptr;                 // standardized features
  const StandardizationReport* report = nullptr;
  std::span<const int> labels;
  std::size_t k = 2;
  const DissimilarityMatrix* dissimilarity = nullptr;
  const ModelParams* point = nullptr;            // canonical, original units
};

enum class TermKind { Main, Cluster, Interaction };

struct TermSummary {
  TermKind kind = TermKind::Main;
  std::size_t feature = 0;
  std::string name;
  double zero_proportion = 0.0;
};

struct QuantitySummary {
  std::size_t effect = 0;   // row of the effect table
  std::string variable;
  std::string level;
  std::size_t cluster = 0;  // 0-based
  bool ratio = false;       // ROR (vs. cluster 1) instead of OR
  double point = 0.0;
  double mean = 0.0;
  double sd = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double z0 = 0.0;
  double a = 0.0;
  bool degenerate = false;
  bool significant = false;
  std::size_t used = 0;
};

struct ReplicateRecord {
  double lambda_cv = 0.0;
  bool converged = true;
  std::size_t redraws = 0;
  std::vector<double> log_values;  // one per quantity, in summary order
  std::vector<char> active;        // one per term
};

struct BootstrapSummary {
  std::size_t replicates = 0;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  std::size_t excluded = 0;        // non-converged replicates
  std::size_t redraws = 0;         // single-class resamples drawn again
  std::size_t jackknife_groups = 0;
  bool recluster = false;
  std::vector<TermSummary> terms;
  std::vector<QuantitySummary> quantities;
  std::vector<ReplicateRecord> records;
  std::vector<std::string> warnings;
};

/// Fits the sparse model on one set of observations (row multiset of the
/// standardized data) and returns canonical parameters in original units plus
/// the fit diagnostics.
struct SparseFit {
  ModelParams params;
  double lambda_cv = 0.0;
  bool converged = true;
};
SparseFit fit_sparse(const GroupedDesign& design, const Dataset& data, const StandardizationReport& report,
                     std::span<const std::size_t> obs, const CvOptions& cv);

/// Nonparametric bootstrap of the sparse fit. Rows are resampled with their
/// cluster labels; replicate b uses seed streams derived from (seed, b), so
/// adding replicates never changes earlier ones and the thread count does not
/// affect the result.
BootstrapSummary bootstrap_run(const BootstrapInput& input, const BootstrapOptions& opts);

/// Terms with zero-proportion below `threshold`. Throws when an interaction
/// is retained without both parents.
struct InclusionScreen {
  std::vector<TermSummary> retained;
  std::vector<TermSummary> dropped;
};
InclusionScreen inclusion_screen(const BootstrapSummary& summary, double threshold = 0.10);

/// Quantity rows with significance (interval excludes 1) marked.
std::vector<QuantitySummary> significance_table(const BootstrapSummary& summary);

nlohmann::json to_json(const BootstrapSummary& summary);
void write_bootstrap_csv(std::ostream& out, const BootstrapSummary& summary);
void write_replicates_csv(std::ostream& out, const BootstrapSummary& summary);

}  // namespace dropclust
