#include "dropclust/irls.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "dropclust/error.hpp"

namespace dropclust {

namespace {

enum class Term { Intercept, Main, Cluster, Interaction };

struct Column {
  Term term;
  std::size_t feature = 0;
  std::size_t level = 0;    // one-hot cell of the feature (0 for continuous)
  std::size_t cluster = 0;  // 0-based cluster
  std::string name;
};

std::vector<Column> layout(const Dataset& ds, std::size_t k, bool interactions) {
  std::vector<Column> cols;
  cols.push_back({Term::Intercept, 0, 0, 0, "(intercept)"});
  for (std::size_t j = 0; j < ds.p(); ++j) {
    const auto& v = ds.features[j];
    if (v.is_categorical())
      for (std::size_t a = 1; a < v.levels.size(); ++a) cols.push_back({Term::Main, j, a, 0, v.name + "=" + v.levels[a]});
    else
      cols.push_back({Term::Main, j, 0, 0, v.name});
  }
  if (k >= 2) {
    for (std::size_t s = 1; s < k; ++s) cols.push_back({Term::Cluster, 0, 0, s, "cluster=" + std::to_string(s + 1)});
    if (interactions) {
      for (std::size_t j = 0; j < ds.p(); ++j) {
        const auto& v = ds.features[j];
        const std::size_t first = v.is_categorical() ? 1 : 0;
        const std::size_t last = v.is_categorical() ? v.levels.size() : 1;
        for (std::size_t a = first; a < last; ++a)
          for (std::size_t s = 1; s < k; ++s)
            cols.push_back({Term::Interaction, j, a, s,
                            (v.is_categorical() ? v.name + "=" + v.levels[a] : v.name) + ":cluster=" +
                                std::to_string(s + 1)});
      }
    }
  }
  return cols;
}

double cell(const Dataset& ds, std::span<const int> labels, std::size_t i, const Column& c) {
  auto feature_value = [&]() {
    if (ds.features[c.feature].is_categorical()) return ds.level(i, c.feature) == c.level ? 1.0 : 0.0;
    return ds.value(i, c.feature);
  };
  auto in_cluster = [&]() { return static_cast<std::size_t>(labels[i] - 1) == c.cluster ? 1.0 : 0.0; };
  switch (c.term) {
    case Term::Intercept: return 1.0;
    case Term::Main: return feature_value();
    case Term::Cluster: return in_cluster();
    case Term::Interaction: return feature_value() * in_cluster();
  }
  return 0.0;
}

// Columns in the span of earlier columns, by sequential Cholesky on X'X.
std::vector<char> aliased_columns(const Eigen::MatrixXd& X, double tol) {
  const Eigen::Index m = X.cols();
  const Eigen::MatrixXd G = X.transpose() * X;
  std::vector<char> aliased(static_cast<std::size_t>(m), 0);
  std::vector<Eigen::Index> kept;
  Eigen::MatrixXd Lf = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index c = 0; c < m; ++c) {
    const auto r = static_cast<Eigen::Index>(kept.size());
    Eigen::VectorXd w(r);
    for (Eigen::Index a = 0; a < r; ++a) {
      double s = G(kept[static_cast<std::size_t>(a)], c);
      for (Eigen::Index b = 0; b < a; ++b) s -= Lf(a, b) * w(b);
      w(a) = s / Lf(a, a);
    }
    const double resid = G(c, c) - w.squaredNorm();
    if (G(c, c) <= 0.0 || resid <= tol * G(c, c)) {
      aliased[static_cast<std::size_t>(c)] = 1;
      continue;
    }
    for (Eigen::Index b = 0; b < r; ++b) Lf(r, b) = w(b);
    Lf(r, r) = std::sqrt(resid);
    kept.push_back(c);
  }
  return aliased;
}

double deviance(const Eigen::VectorXd& eta, const Eigen::VectorXd& y) {
  double d = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double e = eta(i);
    const double l1pe = e > 0.0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
    d += 2.0 * (l1pe - y(i) * e);
  }
  return d;
}

}  // namespace

IrlsResult fit_unpenalized(const Dataset& ds, std::span<const int> labels, std::size_t k, bool include_interactions,
                           const IrlsOptions& opts) {
  const std::size_t n = ds.n();
  if (k < 1) fail_usage("k must be at least 1");
  if (k >= 2) {
    if (labels.size() != n) fail_usage("cluster labels and data set have different lengths");
    for (int l : labels)
      if (l < 1 || static_cast<std::size_t>(l) > k) fail_validation("cluster label outside 1..k");
  }
  const auto cols = layout(ds, k, include_interactions);
  const auto m = static_cast<Eigen::Index>(cols.size());
  Eigen::MatrixXd Xfull(static_cast<Eigen::Index>(n), m);
  for (std::size_t i = 0; i < n; ++i)
    for (Eigen::Index c = 0; c < m; ++c) Xfull(static_cast<Eigen::Index>(i), c) = cell(ds, labels, i, cols[c]);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) y(static_cast<Eigen::Index>(i)) = ds.y[i];
  const double ybar = y.mean();
  if (ybar <= 0.0 || ybar >= 1.0) fail_validation("outcome has one class");

  const auto aliased = aliased_columns(Xfull, opts.alias_tol);
  std::vector<Eigen::Index> kept;
  for (Eigen::Index c = 0; c < m; ++c)
    if (!aliased[static_cast<std::size_t>(c)]) kept.push_back(c);
  const auto r = static_cast<Eigen::Index>(kept.size());
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), r);
  for (Eigen::Index c = 0; c < r; ++c) X.col(c) = Xfull.col(kept[static_cast<std::size_t>(c)]);

  IrlsResult res;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(r);
  if (!aliased[0]) b(0) = std::log(ybar / (1.0 - ybar));
  Eigen::VectorXd eta = X * b;
  double dev = deviance(eta, y);
  Eigen::MatrixXd H(r, r);
  auto hessian = [&](const Eigen::VectorXd& e, Eigen::VectorXd* score) {
    Eigen::VectorXd w(e.size()), resid(e.size());
    for (Eigen::Index i = 0; i < e.size(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-e(i)));
      w(i) = std::max(p * (1.0 - p), 1e-300);
      resid(i) = y(i) - p;
    }
    H = X.transpose() * w.asDiagonal() * X;
    if (score) *score = X.transpose() * resid;
  };

  for (int it = 0; it < opts.max_iter; ++it) {
    res.iterations = it + 1;
    Eigen::VectorXd score;
    hessian(eta, &score);
    const Eigen::VectorXd step = H.ldlt().solve(score);
    double scale = 1.0;
    Eigen::VectorXd b_new, eta_new;
    double dev_new = dev;
    for (int half = 0; half < 40; ++half) {
      b_new = b + scale * step;
      eta_new = X * b_new;
      dev_new = deviance(eta_new, y);
      if (std::isfinite(dev_new) && dev_new <= dev * (1.0 + 1e-15)) break;
      scale *= 0.5;
    }
    const double change = std::abs(dev - dev_new);
    b = b_new;
    eta = eta_new;
    dev = dev_new;
    if (change <= opts.tol * (std::abs(dev) + 0.1)) {
      res.converged = true;
      break;
    }
  }
  hessian(eta, nullptr);
  const Eigen::MatrixXd cov = H.ldlt().solve(Eigen::MatrixXd::Identity(r, r));

  std::vector<double> coef(cols.size(), 0.0), se(cols.size(), 0.0);
  std::vector<NaCause> na(cols.size(), NaCause::None);
  for (Eigen::Index c = 0; c < r; ++c) {
    const auto idx = static_cast<std::size_t>(kept[static_cast<std::size_t>(c)]);
    coef[idx] = b(c);
    se[idx] = std::sqrt(std::max(cov(c, c), 0.0));
    if (std::abs(b(c)) > opts.separation_bound) na[idx] = NaCause::Separated;
  }
  for (std::size_t c = 0; c < cols.size(); ++c)
    if (aliased[c]) na[c] = NaCause::Aliased;

  ModelParams& p = res.params;
  p.coding = Coding::Reference;
  p.k = k;
  if (k >= 2) {
    p.gamma.assign(k, 0.0);
    p.gamma_se.assign(k, 0.0);
    p.gamma_na.assign(k, NaCause::None);
  }
  for (std::size_t j = 0; j < ds.p(); ++j) {
    FeatureParams f;
    f.variable = ds.features[j];
    const std::size_t L = f.variable.level_count();
    f.beta.assign(L, 0.0);
    f.beta_se.assign(L, 0.0);
    f.beta_na.assign(L, NaCause::None);
    if (k >= 2 && include_interactions) {
      f.theta.assign(L * k, 0.0);
      f.theta_se.assign(L * k, 0.0);
      f.theta_na.assign(L * k, NaCause::None);
    }
    f.interaction_active = k >= 2 && include_interactions;
    p.features.push_back(std::move(f));
  }
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const auto& col = cols[c];
    double* value = nullptr;
    double* error = nullptr;
    NaCause* cause = nullptr;
    switch (col.term) {
      case Term::Intercept:
        value = &p.intercept;
        cause = &p.intercept_na;
        break;
      case Term::Main: {
        auto& f = p.features[col.feature];
        value = &f.beta[col.level];
        error = &f.beta_se[col.level];
        cause = &f.beta_na[col.level];
        break;
      }
      case Term::Cluster:
        value = &p.gamma[col.cluster];
        error = &p.gamma_se[col.cluster];
        cause = &p.gamma_na[col.cluster];
        break;
      case Term::Interaction: {
        auto& f = p.features[col.feature];
        const std::size_t at = col.level * k + col.cluster;
        value = &f.theta[at];
        error = &f.theta_se[at];
        cause = &f.theta_na[at];
        break;
      }
    }
    *value = na[c] == NaCause::None ? coef[c] : std::numeric_limits<double>::quiet_NaN();
    if (error) *error = na[c] == NaCause::None ? se[c] : std::numeric_limits<double>::quiet_NaN();
    *cause = na[c];
    res.columns.push_back(col.name);
  }
  res.deviance = dev;
  return res;
}

}  // namespace dropclust
