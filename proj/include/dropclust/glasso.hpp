#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "dropclust/design.hpp"
#include "dropclust/model.hpp"

namespace dropclust {

/// Weighted binomial data over the distinct rows of a design: observations
/// that share a design row are merged into one (trials, successes) pair.
struct BinomialProblem {
  const GroupedDesign* design = nullptr;
  std::vector<std::size_t> rows;  // representative design row per pattern
  std::vector<double> trials;
  std::vector<double> successes;
  double n = 0.0;                 // observation count

  std::size_t size() const { return rows.size(); }
};

/// Problem over the observations `obs` (design row indices, repeats allowed).
BinomialProblem make_problem(const GroupedDesign& design, std::span<const int> y, std::span<const std::size_t> obs);
BinomialProblem make_problem(const GroupedDesign& design, std::span<const int> y);

/// Negative log-likelihood (not averaged) at folded coefficients `coef`;
/// writes the gradient when `grad` is non-null.
double negloglik(const BinomialProblem& prob, std::span<const double> coef, std::vector<double>* grad = nullptr);

/// Group soft-thresholding: v * max(0, 1 - threshold / ||v||).
void prox_group(std::span<double> v, double threshold);

/// Sum of group norms of the folded coefficients.
double penalty(const GroupedDesign& design, std::span<const double> coef);

struct SolverOptions {
  double tol = 1e-9;
  int max_iter = 10000;
  bool trace = false;
};

struct SolveResult {
  std::vector<double> coef;
  double objective = 0.0;  // negloglik / n + lambda * penalty
  double loss = 0.0;       // negloglik
  int iterations = 0;
  int restarts = 0;
  bool converged = false;
  double rel_change = 0.0;
  std::vector<double> trace;
};

/// Coefficients of the intercept-only fit.
std::vector<double> null_coefficients(const BinomialProblem& prob);

/// FISTA with backtracking and function-value restart on
/// negloglik / n + lambda * penalty. An empty warm start means the null fit.
SolveResult fista_solve(const BinomialProblem& prob, double lambda, std::span<const double> warm = {},
                        const SolverOptions& opts = {});

/// Smallest lambda at which every penalised group is zero (up to a relative
/// 1e-12 margin).
double lambda_max(const BinomialProblem& prob);

/// `size` log-spaced values from lmax down to ratio * lmax.
std::vector<double> lambda_grid(double lmax, std::size_t size, double ratio = 1e-3);

struct PathPoint {
  double lambda = 0.0;
  std::vector<double> coef;
  double deviance = 0.0;
  std::size_t active_groups = 0;
  std::size_t active_interactions = 0;
  int iterations = 0;
  bool converged = false;
  double rel_change = 0.0;
};

struct FitPath {
  double lambda_max = 0.0;
  std::vector<PathPoint> points;
};

/// Warm-started path along a decreasing grid.
FitPath fit_path(const BinomialProblem& prob, std::span<const double> grid, const SolverOptions& opts = {});

enum class CvLoss { Deviance, Misclassification };

struct CvOptions {
  std::size_t grid_size = 100;
  double ratio = 1e-3;
  std::size_t folds = 10;
  std::size_t repeats = 50;
  std::uint64_t seed = 1;
  CvLoss loss = CvLoss::Deviance;
  std::size_t heuristic_max = 3;
  SolverOptions solver;
};

struct CvResult {
  std::vector<double> grid;
  std::vector<int> fold_of;                // selected repeat, per observation
  std::vector<double> mean_error;          // selected repeat
  std::vector<double> se;
  std::vector<double> repeat_minimum;
  std::size_t selected_repeat = 0;
  std::size_t best_index = 0;
  double lambda_cv = 0.0;
  std::size_t heuristic_index = 0;
  double lambda_heuristic = 0.0;
  bool stratified = false;
  FitPath path;                            // full data

  const PathPoint& best() const { return path.points[best_index]; }
  const PathPoint& heuristic() const { return path.points[heuristic_index]; }
};

/// K-fold cross-validation over the observations `obs` (all rows when empty).
/// Repeats draw independent fold assignments; the repeat with the lowest
/// minimum error wins.
CvResult cv_select(const GroupedDesign& design, std::span<const int> y, std::span<const std::size_t> obs,
                   const CvOptions& opts);

/// Per-observation validation loss of `coef` on `obs`.
double validation_error(const GroupedDesign& design, std::span<const int> y, std::span<const std::size_t> obs,
                        std::span<const double> coef, CvLoss loss);

/// One-hot parameters assembled from the expanded coefficients:
/// beta = main + copy, gamma = cluster + sum of cluster copies, theta = interaction.
ModelParams recover_params_raw(const GroupedDesign& design, std::span<const double> coef);

/// recover_params_raw followed by the sum-to-zero reparameterisation and a
/// strong-hierarchy check.
ModelParams recover_params(const GroupedDesign& design, std::span<const double> coef);

/// Norm of each penalty group of `coef`.
std::vector<double> group_norms(const GroupedDesign& design, std::span<const double> coef);

nlohmann::json to_json(const CvResult& cv, bool include_path_coefficients = false);
void write_cv_csv(std::ostream& out, const CvResult& cv);

}  // namespace dropclust
