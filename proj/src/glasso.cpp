#include "dropclust/glasso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include <omp.h>

#include "dropclust/error.hpp"
#include "dropclust/random.hpp"

namespace dropclust {

namespace {

// log(1 + exp(x)) without overflow.
double log1pexp(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void linear(const BinomialProblem& prob, std::span<const double> coef, std::vector<double>& eta) {
  const auto& d = *prob.design;
  eta.resize(prob.size());
  for (std::size_t u = 0; u < prob.size(); ++u) {
    const auto c = d.row_cols(prob.rows[u]);
    const auto v = d.row_vals(prob.rows[u]);
    double s = 0.0;
    for (std::size_t e = 0; e < d.stride; ++e) s += v[e] * coef[c[e]];
    if (!std::isfinite(s)) fail_numerical("non-finite linear predictor");
    eta[u] = s;
  }
}

double loss_at(const BinomialProblem& prob, const std::vector<double>& eta) {
  double f = 0.0;
  for (std::size_t u = 0; u < prob.size(); ++u) f += prob.trials[u] * log1pexp(eta[u]) - prob.successes[u] * eta[u];
  return f;
}

void grad_at(const BinomialProblem& prob, const std::vector<double>& eta, std::vector<double>& grad) {
  const auto& d = *prob.design;
  grad.assign(d.m, 0.0);
  for (std::size_t u = 0; u < prob.size(); ++u) {
    const double r = prob.trials[u] * sigmoid(eta[u]) - prob.successes[u];
    if (r == 0.0) continue;
    const auto c = d.row_cols(prob.rows[u]);
    const auto v = d.row_vals(prob.rows[u]);
    for (std::size_t e = 0; e < d.stride; ++e) grad[c[e]] += v[e] * r;
  }
}

void apply_prox(const GroupedDesign& d, std::vector<double>& coef, double threshold) {
  for (const auto& g : d.groups) prox_group(std::span<double>(coef.data() + g.begin, g.size()), threshold);
}

// Largest eigenvalue of X' T X / n by power iteration, for the initial step.
double lipschitz_estimate(const BinomialProblem& prob) {
  const auto& d = *prob.design;
  std::vector<double> v(d.m, 1.0 / std::sqrt(static_cast<double>(d.m))), w(d.m);
  double lam = 0.0;
  for (int it = 0; it < 30; ++it) {
    std::fill(w.begin(), w.end(), 0.0);
    for (std::size_t u = 0; u < prob.size(); ++u) {
      const auto c = d.row_cols(prob.rows[u]);
      const auto x = d.row_vals(prob.rows[u]);
      double s = 0.0;
      for (std::size_t e = 0; e < d.stride; ++e) s += x[e] * v[c[e]];
      s *= prob.trials[u];
      for (std::size_t e = 0; e < d.stride; ++e) w[c[e]] += x[e] * s;
    }
    double norm = 0.0;
    for (double a : w) norm += a * a;
    norm = std::sqrt(norm);
    if (norm == 0.0) return 1.0;
    lam = norm;
    for (std::size_t i = 0; i < d.m; ++i) v[i] = w[i] / norm;
  }
  return std::max(lam / (4.0 * prob.n), 1e-12);
}

std::size_t active_interactions(const GroupedDesign& d, std::span<const double> coef) {
  std::size_t count = 0;
  for (const auto& f : d.features) {
    const auto& g = d.groups[f.composite_group];
    for (std::size_t c = g.begin; c < g.end; ++c)
      if (coef[c] != 0.0) {
        ++count;
        break;
      }
  }
  return count;
}

}  // namespace

BinomialProblem make_problem(const GroupedDesign& design, std::span<const int> y, std::span<const std::size_t> obs) {
  if (y.size() != design.n) fail_usage("outcome and design have different lengths");
  BinomialProblem prob;
  prob.design = &design;
  const std::size_t np = design.pattern_row.size();
  std::vector<double> trials(np, 0.0), succ(np, 0.0);
  for (std::size_t i : obs) {
    if (i >= design.n) fail_usage("observation index out of range");
    trials[design.pattern[i]] += 1.0;
    succ[design.pattern[i]] += y[i];
  }
  for (std::size_t u = 0; u < np; ++u) {
    if (trials[u] == 0.0) continue;
    prob.rows.push_back(design.pattern_row[u]);
    prob.trials.push_back(trials[u]);
    prob.successes.push_back(succ[u]);
  }
  prob.n = static_cast<double>(obs.size());
  return prob;
}

BinomialProblem make_problem(const GroupedDesign& design, std::span<const int> y) {
  std::vector<std::size_t> all(design.n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  return make_problem(design, y, all);
}

double negloglik(const BinomialProblem& prob, std::span<const double> coef, std::vector<double>* grad) {
  if (coef.size() != prob.design->m) fail_usage("coefficient vector has the wrong length");
  std::vector<double> eta;
  linear(prob, coef, eta);
  if (grad) grad_at(prob, eta, *grad);
  return loss_at(prob, eta);
}

void prox_group(std::span<double> v, double threshold) {
  double norm = 0.0;
  for (double a : v) norm += a * a;
  norm = std::sqrt(norm);
  if (norm <= threshold) {
    std::fill(v.begin(), v.end(), 0.0);
    return;
  }
  const double scale = 1.0 - threshold / norm;
  for (double& a : v) a *= scale;
}

std::vector<double> group_norms(const GroupedDesign& design, std::span<const double> coef) {
  std::vector<double> out;
  out.reserve(design.groups.size());
  for (const auto& g : design.groups) {
    double s = 0.0;
    for (std::size_t c = g.begin; c < g.end; ++c) s += coef[c] * coef[c];
    out.push_back(std::sqrt(s));
  }
  return out;
}

double penalty(const GroupedDesign& design, std::span<const double> coef) {
  const auto norms = group_norms(design, coef);
  return std::accumulate(norms.begin(), norms.end(), 0.0);
}

std::vector<double> null_coefficients(const BinomialProblem& prob) {
  const double ys = std::accumulate(prob.successes.begin(), prob.successes.end(), 0.0);
  if (ys <= 0.0 || ys >= prob.n) fail_numerical("outcome has one class");
  std::vector<double> coef(prob.design->m, 0.0);
  coef[0] = std::log(ys / (prob.n - ys));
  return coef;
}

SolveResult fista_solve(const BinomialProblem& prob, double lambda, std::span<const double> warm,
                        const SolverOptions& opts) {
  if (lambda < 0.0) fail_usage("lambda must be non-negative");
  const auto& d = *prob.design;
  const std::size_t m = d.m;
  const double inv_n = 1.0 / prob.n;

  SolveResult res;
  std::vector<double> x = warm.empty() ? null_coefficients(prob) : std::vector<double>(warm.begin(), warm.end());
  if (x.size() != m) fail_usage("warm start has the wrong length");

  std::vector<double> eta_x, eta_y, eta_z, gy, y(x), z(m);
  linear(prob, x, eta_x);
  double fx = loss_at(prob, eta_x) * inv_n;
  double Fx = fx + lambda * penalty(d, x);
  eta_y = eta_x;
  double fy = fx;
  grad_at(prob, eta_y, gy);
  for (auto& g : gy) g *= inv_n;

  double L = lipschitz_estimate(prob);
  double t = 1.0;
  bool momentum = false;
  if (opts.trace) res.trace.push_back(Fx);

  for (int it = 0; it < opts.max_iter; ++it) {
    res.iterations = it + 1;
    double fz = 0.0, Fz = 0.0;
    for (;;) {
      for (std::size_t i = 0; i < m; ++i) z[i] = y[i] - gy[i] / L;
      apply_prox(d, z, lambda / L);
      linear(prob, z, eta_z);
      fz = loss_at(prob, eta_z) * inv_n;
      double lin = 0.0, quad = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double dz = z[i] - y[i];
        lin += gy[i] * dz;
        quad += dz * dz;
      }
      if (fz <= fy + lin + 0.5 * L * quad + 1e-14 * std::abs(fy)) break;
      L *= 2.0;
    }
    Fz = fz + lambda * penalty(d, z);

    if (Fz > Fx) {
      if (momentum) {
        // Function-value restart: drop the momentum and step from x.
        ++res.restarts;
        momentum = false;
        t = 1.0;
        y = x;
        eta_y = eta_x;
        fy = fx;
        grad_at(prob, eta_y, gy);
        for (auto& g : gy) g *= inv_n;
        continue;
      }
      // A plain proximal step cannot increase the objective; this is rounding.
      res.converged = true;
      res.rel_change = 0.0;
      break;
    }

    res.rel_change = (Fx - Fz) / std::max(1.0, std::abs(Fx));
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double beta = (t - 1.0) / t_next;
    for (std::size_t i = 0; i < m; ++i) y[i] = z[i] + beta * (z[i] - x[i]);
    for (std::size_t u = 0; u < eta_z.size(); ++u) eta_y[u] = eta_z[u] + beta * (eta_z[u] - eta_x[u]);
    std::swap(x, z);
    std::swap(eta_x, eta_z);
    fx = fz;
    Fx = Fz;
    t = t_next;
    momentum = beta != 0.0;
    if (opts.trace) res.trace.push_back(Fx);
    if (res.rel_change < opts.tol) {
      res.converged = true;
      break;
    }
    fy = loss_at(prob, eta_y) * inv_n;
    grad_at(prob, eta_y, gy);
    for (auto& g : gy) g *= inv_n;
  }

  res.coef = std::move(x);
  res.loss = fx * prob.n;
  res.objective = Fx;
  return res;
}

double lambda_max(const BinomialProblem& prob) {
  const auto& d = *prob.design;
  if (d.groups.empty()) return 0.0;
  const auto coef = null_coefficients(prob);
  std::vector<double> grad;
  negloglik(prob, coef, &grad);
  double best = 0.0;
  for (const auto& g : d.groups) {
    double s = 0.0;
    for (std::size_t c = g.begin; c < g.end; ++c) s += grad[c] * grad[c];
    best = std::max(best, std::sqrt(s) / prob.n);
  }
  // Rounded up so that the proximal step at lambda_max lands exactly on zero.
  return best * (1.0 + 1e-12);
}

std::vector<double> lambda_grid(double lmax, std::size_t size, double ratio) {
  if (size < 1) fail_usage("lambda grid needs at least one point");
  if (!(ratio > 0.0 && ratio < 1.0)) fail_usage("lambda grid ratio must lie in (0, 1)");
  if (lmax <= 0.0) return {0.0};
  std::vector<double> grid(size);
  if (size == 1) return {lmax};
  const double step = std::log(ratio) / static_cast<double>(size - 1);
  for (std::size_t l = 0; l < size; ++l) grid[l] = lmax * std::exp(step * static_cast<double>(l));
  grid.front() = lmax;
  return grid;
}

FitPath fit_path(const BinomialProblem& prob, std::span<const double> grid, const SolverOptions& opts) {
  FitPath path;
  path.lambda_max = lambda_max(prob);
  std::vector<double> warm = null_coefficients(prob);
  const auto& d = *prob.design;
  for (double lambda : grid) {
    auto r = fista_solve(prob, lambda, warm, opts);
    PathPoint pt;
    pt.lambda = lambda;
    pt.deviance = 2.0 * r.loss;
    const auto norms = group_norms(d, r.coef);
    pt.active_groups = static_cast<std::size_t>(std::count_if(norms.begin(), norms.end(), [](double v) { return v > 0.0; }));
    pt.active_interactions = active_interactions(d, r.coef);
    pt.iterations = r.iterations;
    pt.converged = r.converged;
    pt.rel_change = r.rel_change;
    warm = r.coef;
    pt.coef = std::move(r.coef);
    path.points.push_back(std::move(pt));
  }
  return path;
}

double validation_error(const GroupedDesign& design, std::span<const int> y, std::span<const std::size_t> obs,
                        std::span<const double> coef, CvLoss loss) {
  if (obs.empty()) fail_usage("empty validation set");
  double total = 0.0;
  for (std::size_t i : obs) {
    const auto c = design.row_cols(i);
    const auto v = design.row_vals(i);
    double eta = 0.0;
    for (std::size_t e = 0; e < design.stride; ++e) eta += v[e] * coef[c[e]];
    if (loss == CvLoss::Deviance) total += 2.0 * (log1pexp(eta) - y[i] * eta);
    else total += ((eta > 0.0 ? 1 : 0) != y[i]) ? 1.0 : 0.0;
  }
  return total / static_cast<double>(obs.size());
}

namespace {

bool folds_ok(const std::vector<int>& fold, std::span<const int> yobs, std::size_t folds) {
  std::vector<int> pos(folds, 0), cnt(folds, 0);
  int total_pos = 0;
  for (std::size_t i = 0; i < fold.size(); ++i) {
    cnt[fold[i]] += 1;
    pos[fold[i]] += yobs[i];
    total_pos += yobs[i];
  }
  const int total = static_cast<int>(fold.size());
  for (std::size_t f = 0; f < folds; ++f) {
    if (pos[f] == 0 || pos[f] == cnt[f]) return false;
    const int tp = total_pos - pos[f], tc = total - cnt[f];
    if (tp == 0 || tp == tc) return false;
  }
  return true;
}

// Random fold labels; falls back to class-stratified dealing when a fold
// would hold a single class.
std::vector<int> assign_folds(std::span<const int> yobs, std::size_t folds, std::uint64_t seed, bool& stratified) {
  const std::size_t N = yobs.size();
  Rng rng(seed);
  std::vector<std::size_t> perm(N);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.shuffle(perm);
  std::vector<int> fold(N);
  for (std::size_t i = 0; i < N; ++i) fold[perm[i]] = static_cast<int>(i % folds);
  if (folds_ok(fold, yobs, folds)) return fold;

  stratified = true;
  std::vector<std::size_t> cls[2];
  for (std::size_t i = 0; i < N; ++i) cls[yobs[i] ? 1 : 0].push_back(i);
  std::size_t dealt = 0;
  for (auto& c : cls) {
    rng.shuffle(c);
    for (std::size_t i : c) fold[i] = static_cast<int>(dealt++ % folds);
  }
  if (!folds_ok(fold, yobs, folds))
    fail_validation("too few observations of one outcome class for " + std::to_string(folds) + "-fold cross-validation");
  return fold;
}

}  // namespace

CvResult cv_select(const GroupedDesign& design, std::span<const int> y, std::span<const std::size_t> obs_in,
                   const CvOptions& opts) {
  if (opts.folds < 2) fail_usage("cross-validation needs at least 2 folds");
  if (opts.repeats < 1) fail_usage("cross-validation needs at least 1 repeat");
  std::vector<std::size_t> obs(obs_in.begin(), obs_in.end());
  if (obs.empty()) {
    obs.resize(design.n);
    std::iota(obs.begin(), obs.end(), std::size_t{0});
  }
  const std::size_t N = obs.size();
  if (N < opts.folds) fail_validation("fewer observations than folds");
  std::vector<int> yobs(N);
  for (std::size_t i = 0; i < N; ++i) yobs[i] = y[obs[i]];

  CvResult cv;
  const auto full = make_problem(design, y, obs);
  cv.grid = lambda_grid(lambda_max(full), opts.grid_size, opts.ratio);
  const std::size_t G = cv.grid.size();
  const std::size_t R = opts.repeats, F = opts.folds;

  std::vector<std::vector<int>> folds(R);
  std::vector<char> strat(R, 0);
  for (std::size_t r = 0; r < R; ++r) {
    bool s = false;
    folds[r] = assign_folds(yobs, F, stream_seed(opts.seed, {r}), s);
    strat[r] = s;
  }

  std::vector<std::vector<double>> err(R * F, std::vector<double>(G, 0.0));
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t task = 0; task < R * F; ++task) {
    try {
      const std::size_t r = task / F;
      const int f = static_cast<int>(task % F);
      std::vector<std::size_t> train, valid;
      for (std::size_t i = 0; i < N; ++i) (folds[r][i] == f ? valid : train).push_back(obs[i]);
      const auto prob = make_problem(design, y, train);
      const auto path = fit_path(prob, cv.grid, opts.solver);
      for (std::size_t l = 0; l < G; ++l) err[task][l] = validation_error(design, y, valid, path.points[l].coef, opts.loss);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<std::vector<double>> mean(R, std::vector<double>(G, 0.0)), se(R, std::vector<double>(G, 0.0));
  cv.repeat_minimum.assign(R, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> argmin(R, 0);
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t l = 0; l < G; ++l) {
      double s = 0.0, ss = 0.0;
      for (std::size_t f = 0; f < F; ++f) s += err[r * F + f][l];
      const double mu = s / static_cast<double>(F);
      for (std::size_t f = 0; f < F; ++f) ss += (err[r * F + f][l] - mu) * (err[r * F + f][l] - mu);
      mean[r][l] = mu;
      se[r][l] = std::sqrt(ss / static_cast<double>(F - 1) / static_cast<double>(F));
      if (mu < cv.repeat_minimum[r]) {
        cv.repeat_minimum[r] = mu;
        argmin[r] = l;
      }
    }
  }
  cv.selected_repeat = static_cast<std::size_t>(
      std::min_element(cv.repeat_minimum.begin(), cv.repeat_minimum.end()) - cv.repeat_minimum.begin());
  const std::size_t r = cv.selected_repeat;
  cv.mean_error = mean[r];
  cv.se = se[r];
  cv.fold_of = folds[r];
  cv.stratified = strat[r] != 0;
  cv.best_index = argmin[r];
  cv.lambda_cv = cv.grid[cv.best_index];

  cv.path = fit_path(full, cv.grid, opts.solver);
  cv.heuristic_index = 0;
  for (std::size_t l = 0; l <= cv.best_index; ++l)
    if (cv.path.points[l].active_interactions <= opts.heuristic_max) cv.heuristic_index = l;
  cv.lambda_heuristic = cv.grid[cv.heuristic_index];
  return cv;
}

ModelParams recover_params_raw(const GroupedDesign& d, std::span<const double> coef) {
  if (coef.size() != d.m) fail_usage("coefficient vector has the wrong length");
  auto raw = [&](std::size_t c) { return coef[c] / d.weight[c]; };
  const auto norms = group_norms(d, coef);
  ModelParams p;
  p.coding = Coding::OneHot;
  p.k = d.k;
  p.intercept = coef[0];
  p.gamma.resize(d.k);
  for (std::size_t s = 0; s < d.k; ++s) p.gamma[s] = raw(d.cluster + s);
  p.cluster_active = norms[d.cluster_group] > 0.0;
  for (std::size_t j = 0; j < d.features.size(); ++j) {
    const auto& fc = d.features[j];
    FeatureParams f;
    f.variable = d.variables[j];
    const bool composite = norms[fc.composite_group] > 0.0;
    f.beta.resize(fc.levels);
    for (std::size_t a = 0; a < fc.levels; ++a) f.beta[a] = raw(fc.main + a) + raw(fc.copy_x + a);
    for (std::size_t s = 0; s < d.k; ++s) p.gamma[s] += raw(fc.copy_c + s);
    f.theta.resize(fc.levels * d.k);
    for (std::size_t c = 0; c < fc.levels * d.k; ++c) f.theta[c] = raw(fc.xi + c);
    f.beta_na.assign(f.beta.size(), NaCause::None);
    f.theta_na.assign(f.theta.size(), NaCause::None);
    f.main_active = norms[fc.main_group] > 0.0 || composite;
    f.interaction_active = composite;
    p.cluster_active = p.cluster_active || composite;
    p.features.push_back(std::move(f));
  }
  p.gamma_na.assign(p.gamma.size(), NaCause::None);
  return p;
}

ModelParams recover_params(const GroupedDesign& d, std::span<const double> coef) {
  auto p = canonicalize(recover_params_raw(d, coef));
  if (!p.satisfies_hierarchy()) fail_numerical("recovered parameters violate strong hierarchy");
  return p;
}

nlohmann::json to_json(const CvResult& cv, bool include_path_coefficients) {
  nlohmann::json pts = nlohmann::json::array();
  for (std::size_t l = 0; l < cv.path.points.size(); ++l) {
    const auto& p = cv.path.points[l];
    nlohmann::json jp = {{"lambda", p.lambda},
                         {"deviance", p.deviance},
                         {"active_groups", p.active_groups},
                         {"active_interactions", p.active_interactions},
                         {"iterations", p.iterations},
                         {"converged", p.converged},
                         {"rel_change", p.rel_change},
                         {"cv_mean", cv.mean_error[l]},
                         {"cv_se", cv.se[l]}};
    if (include_path_coefficients) jp["coef"] = p.coef;
    pts.push_back(std::move(jp));
  }
  return {{"lambda_max", cv.path.lambda_max},
          {"lambda_cv", cv.lambda_cv},
          {"best_index", cv.best_index},
          {"lambda_heuristic", cv.lambda_heuristic},
          {"heuristic_index", cv.heuristic_index},
          {"selected_repeat", cv.selected_repeat},
          {"repeat_minimum", cv.repeat_minimum},
          {"stratified_folds", cv.stratified},
          {"fold_of", cv.fold_of},
          {"path", pts}};
}

void write_cv_csv(std::ostream& out, const CvResult& cv) {
  out << "lambda,mean_error,se,active_interactions\n";
  out.precision(17);
  for (std::size_t l = 0; l < cv.grid.size(); ++l)
    out << cv.grid[l] << ',' << cv.mean_error[l] << ',' << cv.se[l] << ',' << cv.path.points[l].active_interactions
        << '\n';
}

}  // namespace dropclust
