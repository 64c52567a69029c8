#include "dropclust/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>

#include <boost/math/distributions/normal.hpp>

#include "dropclust/design.hpp"
#include "dropclust/error.hpp"
#include "dropclust/pam.hpp"
#include "dropclust/random.hpp"

namespace dropclust {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) fail_usage("normal quantile needs p in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double quantile_sorted(std::span<const double> sorted, double prob) {
  if (sorted.empty()) fail_usage("quantile of an empty sample");
  prob = std::clamp(prob, 0.0, 1.0);
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::pair<double, double> percentile_interval(std::span<const double> replicates, double alpha) {
  std::vector<double> s(replicates.begin(), replicates.end());
  std::sort(s.begin(), s.end());
  return {quantile_sorted(s, alpha / 2.0), quantile_sorted(s, 1.0 - alpha / 2.0)};
}

double jackknife_acceleration(std::span<const double> jack) {
  if (jack.size() < 2) return 0.0;
  const double mean = std::accumulate(jack.begin(), jack.end(), 0.0) / static_cast<double>(jack.size());
  double num = 0.0, den = 0.0;
  for (double v : jack) {
    const double d = mean - v;
    num += d * d * d;
    den += d * d;
  }
  if (den <= 0.0) return 0.0;
  return num / (6.0 * std::pow(den, 1.5));
}

BcaInterval bca_interval_with(std::span<const double> replicates, double alpha, double z0, double a) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail_usage("alpha must lie in (0, 1)");
  if (replicates.empty()) fail_usage("BCa interval needs replicates");
  std::vector<double> s(replicates.begin(), replicates.end());
  std::sort(s.begin(), s.end());
  BcaInterval out;
  out.z0 = z0;
  out.a = a;
  if (s.front() == s.back()) {
    out.lower = out.upper = s.front();
    out.degenerate = true;
    out.warning = "all replicates identical";
    return out;
  }
  auto adjusted = [&](double zq) {
    const double num = z0 + zq;
    const double den = 1.0 - a * num;
    if (den <= 0.0) return zq > 0.0 ? 1.0 : 0.0;
    return normal_cdf(z0 + num / den);
  };
  out.lower = quantile_sorted(s, adjusted(normal_quantile(alpha / 2.0)));
  out.upper = quantile_sorted(s, adjusted(normal_quantile(1.0 - alpha / 2.0)));
  if (s.size() < 100) out.warning = "fewer than 100 replicates";
  return out;
}

BcaInterval bca_interval(std::span<const double> replicates, double point, double alpha,
                         std::span<const double> jackknife) {
  if (replicates.empty()) fail_usage("BCa interval needs replicates");
  const double B = static_cast<double>(replicates.size());
  double below = 0.0;
  for (double v : replicates) below += v < point ? 1.0 : (v == point ? 0.5 : 0.0);
  double frac = below / B;
  std::string warning;
  if (frac <= 0.0 || frac >= 1.0) {
    frac = std::clamp(frac, 0.5 / B, 1.0 - 0.5 / B);
    warning = "point estimate outside the replicate range";
  }
  auto out = bca_interval_with(replicates, alpha, normal_quantile(frac), jackknife_acceleration(jackknife));
  if (!warning.empty() && !out.degenerate) out.warning = warning;
  return out;
}

SparseFit fit_sparse(const GroupedDesign& design, const Dataset& data, const StandardizationReport& report,
                     std::span<const std::size_t> obs, const CvOptions& cv) {
  const auto res = cv_select(design, data.y, obs, cv);
  SparseFit fit;
  fit.params = to_original_units(recover_params(design, res.best().coef), report);
  fit.lambda_cv = res.lambda_cv;
  fit.converged = res.best().converged;
  return fit;
}

namespace {

struct Quantity {
  std::size_t effect, cluster;
  bool ratio;
};

std::vector<Quantity> quantity_layout(const std::vector<EffectEstimate>& table) {
  std::vector<Quantity> q;
  for (std::size_t e = 0; e < table.size(); ++e) {
    for (std::size_t s = 0; s < table[e].clusters(); ++s) q.push_back({e, s, false});
    for (std::size_t s = 1; s < table[e].clusters(); ++s) q.push_back({e, s, true});
  }
  return q;
}

std::vector<double> quantity_values(const std::vector<Quantity>& layout, const std::vector<EffectEstimate>& table) {
  std::vector<double> v;
  v.reserve(layout.size());
  for (const auto& q : layout) v.push_back(q.ratio ? table[q.effect].log_ror[q.cluster] : table[q.effect].log_or[q.cluster]);
  return v;
}

std::vector<TermSummary> term_layout(const ModelParams& p) {
  std::vector<TermSummary> t;
  for (std::size_t j = 0; j < p.features.size(); ++j) t.push_back({TermKind::Main, j, p.features[j].variable.name, 0.0});
  t.push_back({TermKind::Cluster, 0, "cluster", 0.0});
  for (std::size_t j = 0; j < p.features.size(); ++j)
    t.push_back({TermKind::Interaction, j, p.features[j].variable.name + ":cluster", 0.0});
  return t;
}

std::vector<char> term_activity(const std::vector<TermSummary>& terms, const ModelParams& p) {
  std::vector<char> a;
  for (const auto& t : terms) {
    switch (t.kind) {
      case TermKind::Main: a.push_back(p.features[t.feature].main_active); break;
      case TermKind::Cluster: a.push_back(p.cluster_active); break;
      case TermKind::Interaction: a.push_back(p.features[t.feature].interaction_active); break;
    }
  }
  return a;
}

// Relabels `fresh` so that it agrees best with `reference` (both 1..k).
std::vector<int> align_labels(std::span<const int> fresh, std::span<const int> reference, std::size_t k) {
  std::vector<std::vector<std::size_t>> count(k, std::vector<std::size_t>(k, 0));
  for (std::size_t i = 0; i < fresh.size(); ++i) ++count[fresh[i] - 1][reference[i] - 1];
  std::vector<std::size_t> perm(k), best(k);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  best = perm;
  if (k <= 8) {
    std::size_t best_score = 0;
    bool first = true;
    do {
      std::size_t score = 0;
      for (std::size_t s = 0; s < k; ++s) score += count[s][perm[s]];
      if (first || score > best_score) {
        best_score = score;
        best = perm;
        first = false;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    std::vector<char> used(k, 0);
    for (std::size_t s = 0; s < k; ++s) {
      std::size_t arg = k;
      for (std::size_t t = 0; t < k; ++t)
        if (!used[t] && (arg == k || count[s][t] > count[s][arg])) arg = t;
      best[s] = arg;
      used[arg] = 1;
    }
  }
  std::vector<int> out(fresh.size());
  for (std::size_t i = 0; i < fresh.size(); ++i) out[i] = static_cast<int>(best[fresh[i] - 1] + 1);
  return out;
}

bool both_classes(const Dataset& ds, std::span<const std::size_t> rows) {
  bool seen[2] = {false, false};
  for (std::size_t r : rows) seen[ds.y[r] ? 1 : 0] = true;
  return seen[0] && seen[1];
}

}  // namespace

BootstrapSummary bootstrap_run(const BootstrapInput& in, const BootstrapOptions& opts) {
  if (!in.data || !in.report || !in.point) fail_usage("bootstrap needs data, standardization and point estimates");
  if (opts.replicates < 1) fail_usage("bootstrap needs at least one replicate");
  if (!(opts.alpha > 0.0 && opts.alpha < 0.5)) fail_usage("alpha must lie in (0, 0.5)");
  if (opts.recluster_per_replicate && !in.dissimilarity) fail_usage("re-clustering needs the dissimilarity matrix");
  const Dataset& ds = *in.data;
  const std::size_t n = ds.n();
  const std::size_t B = opts.replicates;

  const GroupedDesign design = build_design(ds, in.labels, in.k);
  const auto point_table = effect_table(*in.point, opts.standardized_units);
  const auto layout = quantity_layout(point_table);
  const auto point_values = quantity_values(layout, point_table);

  BootstrapSummary sum;
  sum.replicates = B;
  sum.alpha = opts.alpha;
  sum.seed = opts.seed;
  sum.recluster = opts.recluster_per_replicate;
  sum.terms = term_layout(*in.point);

  // Fit on a row multiset of the original data.
  auto refit = [&](const std::vector<std::size_t>& rows, std::uint64_t cv_seed, std::uint64_t pam_seed) {
    CvOptions cv = opts.cv;
    cv.seed = cv_seed;
    if (!opts.recluster_per_replicate) return fit_sparse(design, ds, *in.report, rows, cv);
    const auto sub = in.dissimilarity->submatrix(rows);
    const auto part = pam_fit(sub, in.k, opts.recluster_restarts, pam_seed);
    std::vector<int> ref(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) ref[i] = in.labels[rows[i]];
    const auto labels = align_labels(part.labels, ref, in.k);
    const Dataset sds = subset_rows(ds, rows);
    const GroupedDesign sd = build_design(sds, labels, in.k);
    std::vector<std::size_t> all(rows.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return fit_sparse(sd, sds, *in.report, all, cv);
  };

  std::vector<ReplicateRecord> records(B);
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t b = 0; b < B; ++b) {
    try {
      std::vector<std::size_t> rows(n);
      std::size_t attempt = 0;
      for (;; ++attempt) {
        if (attempt > opts.max_redraws) fail_numerical("could not draw a resample with both outcome classes");
        Rng rng(stream_seed(opts.seed, {0, b, attempt}));
        for (auto& r : rows) r = rng.below(n);
        if (both_classes(ds, rows)) break;
      }
      const auto fit = refit(rows, stream_seed(opts.seed, {1, b}), stream_seed(opts.seed, {4, b}));
      auto& rec = records[b];
      rec.redraws = attempt;
      rec.lambda_cv = fit.lambda_cv;
      rec.converged = fit.converged;
      rec.log_values = quantity_values(layout, effect_table(fit.params, opts.standardized_units));
      rec.active = term_activity(sum.terms, fit.params);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  // Grouped jackknife for the acceleration constant.
  const std::size_t G = std::min(opts.jackknife_groups, n);
  sum.jackknife_groups = G;
  std::vector<std::vector<double>> jack(G);
  if (G >= 2) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(stream_seed(opts.seed, {2}));
    rng.shuffle(perm);
    std::vector<std::size_t> group(n);
    for (std::size_t i = 0; i < n; ++i) group[perm[i]] = i % G;
#pragma omp parallel for schedule(dynamic)
    for (std::size_t g = 0; g < G; ++g) {
      try {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < n; ++i)
          if (group[i] != g) rows.push_back(i);
        const auto fit = refit(rows, stream_seed(opts.seed, {3, g}), stream_seed(opts.seed, {5, g}));
        jack[g] = quantity_values(layout, effect_table(fit.params, opts.standardized_units));
      } catch (...) {
#pragma omp critical
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  } else {
    sum.warnings.push_back("jackknife skipped; acceleration set to 0");
  }

  for (const auto& r : records) {
    sum.redraws += r.redraws;
    if (!r.converged) ++sum.excluded;
  }
  if (sum.excluded == B) fail_numerical("no bootstrap replicate converged");
  if (B - sum.excluded < 100) sum.warnings.push_back("fewer than 100 usable replicates; BCa endpoints are unstable");

  for (std::size_t t = 0; t < sum.terms.size(); ++t) {
    std::size_t zeros = 0, used = 0;
    for (const auto& r : records) {
      if (!r.converged) continue;
      ++used;
      if (!r.active[t]) ++zeros;
    }
    sum.terms[t].zero_proportion = static_cast<double>(zeros) / static_cast<double>(used);
  }

  for (std::size_t q = 0; q < layout.size(); ++q) {
    QuantitySummary qs;
    qs.effect = layout[q].effect;
    qs.cluster = layout[q].cluster;
    qs.ratio = layout[q].ratio;
    qs.variable = point_table[qs.effect].variable;
    qs.level = point_table[qs.effect].level;
    qs.point = std::exp(point_values[q]);
    std::vector<double> vals;
    for (const auto& r : records)
      if (r.converged && std::isfinite(r.log_values[q])) vals.push_back(r.log_values[q]);
    std::vector<double> jv;
    for (const auto& j : jack)
      if (!j.empty() && std::isfinite(j[q])) jv.push_back(j[q]);
    qs.used = vals.size();
    if (vals.empty()) {
      qs.degenerate = true;
      qs.lower = qs.upper = qs.mean = std::numeric_limits<double>::quiet_NaN();
      sum.warnings.push_back("no finite replicate for " + qs.variable + "=" + qs.level);
      sum.quantities.push_back(qs);
      continue;
    }
    double m = 0.0, ss = 0.0;
    for (double v : vals) m += std::exp(v);
    m /= static_cast<double>(vals.size());
    for (double v : vals) ss += (std::exp(v) - m) * (std::exp(v) - m);
    qs.mean = m;
    qs.sd = vals.size() > 1 ? std::sqrt(ss / static_cast<double>(vals.size() - 1)) : 0.0;
    const auto ci = std::isfinite(point_values[q]) ? bca_interval(vals, point_values[q], opts.alpha, jv)
                                                   : bca_interval_with(vals, opts.alpha, 0.0, 0.0);
    qs.lower = std::exp(ci.lower);
    qs.upper = std::exp(ci.upper);
    qs.z0 = ci.z0;
    qs.a = ci.a;
    qs.degenerate = ci.degenerate;
    qs.significant = !qs.degenerate && (qs.lower > 1.0 || qs.upper < 1.0);
    sum.quantities.push_back(qs);
  }
  if (opts.keep_replicates) sum.records = std::move(records);
  return sum;
}

InclusionScreen inclusion_screen(const BootstrapSummary& summary, double threshold) {
  InclusionScreen out;
  std::vector<char> keep(summary.terms.size(), 0);
  for (std::size_t t = 0; t < summary.terms.size(); ++t) keep[t] = summary.terms[t].zero_proportion < threshold;
  auto kept = [&](TermKind kind, std::size_t feature) {
    for (std::size_t t = 0; t < summary.terms.size(); ++t)
      if (summary.terms[t].kind == kind && (kind == TermKind::Cluster || summary.terms[t].feature == feature))
        return keep[t] != 0;
    return false;
  };
  for (std::size_t t = 0; t < summary.terms.size(); ++t) {
    const auto& term = summary.terms[t];
    if (keep[t] && term.kind == TermKind::Interaction &&
        (!kept(TermKind::Main, term.feature) || !kept(TermKind::Cluster, 0)))
      fail_numerical("retained interaction '" + term.name + "' lacks a retained parent main effect");
    (keep[t] ? out.retained : out.dropped).push_back(term);
  }
  return out;
}

std::vector<QuantitySummary> significance_table(const BootstrapSummary& summary) {
  auto rows = summary.quantities;
  for (auto& q : rows) q.significant = !q.degenerate && (q.lower > 1.0 || q.upper < 1.0);
  return rows;
}

namespace {

const char* kind_name(TermKind k) {
  switch (k) {
    case TermKind::Main: return "main";
    case TermKind::Cluster: return "cluster";
    case TermKind::Interaction: return "interaction";
  }
  return "main";
}

nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json to_json(const BootstrapSummary& s) {
  nlohmann::json terms = nlohmann::json::array(), qs = nlohmann::json::array(), reps = nlohmann::json::array();
  for (const auto& t : s.terms)
    terms.push_back({{"term", t.name}, {"kind", kind_name(t.kind)}, {"zero_proportion", t.zero_proportion}});
  for (const auto& q : significance_table(s))
    qs.push_back({{"variable", q.variable},
                  {"level", q.level},
                  {"cluster", q.cluster + 1},
                  {"quantity", q.ratio ? "ROR" : "OR"},
                  {"point", num(q.point)},
                  {"mean", num(q.mean)},
                  {"sd", num(q.sd)},
                  {"lower", num(q.lower)},
                  {"upper", num(q.upper)},
                  {"z0", q.z0},
                  {"a", q.a},
                  {"degenerate", q.degenerate},
                  {"significant", q.significant},
                  {"replicates_used", q.used}});
  for (const auto& r : s.records) reps.push_back({{"lambda_cv", r.lambda_cv}, {"converged", r.converged}});
  return {{"replicates", s.replicates},
          {"alpha", s.alpha},
          {"seed", s.seed},
          {"excluded", s.excluded},
          {"redraws", s.redraws},
          {"jackknife_groups", s.jackknife_groups},
          {"recluster_per_replicate", s.recluster},
          {"terms", terms},
          {"quantities", qs},
          {"replicate_fits", reps},
          {"warnings", s.warnings}};
}

void write_bootstrap_csv(std::ostream& out, const BootstrapSummary& s) {
  out << "variable,level,cluster,quantity,point,mean,sd,lower,upper,significant,degenerate\n";
  out << std::setprecision(10);
  for (const auto& q : significance_table(s)) {
    out << q.variable << ',' << q.level << ',' << q.cluster + 1 << ',' << (q.ratio ? "ROR" : "OR") << ',' << q.point
        << ',' << q.mean << ',' << q.sd << ',' << q.lower << ',' << q.upper << ',' << (q.significant ? 1 : 0) << ','
        << (q.degenerate ? 1 : 0) << '\n';
  }
}

void write_replicates_csv(std::ostream& out, const BootstrapSummary& s) {
  out << "replicate,variable,level,cluster,quantity,value\n";
  out << std::setprecision(10);
  for (std::size_t b = 0; b < s.records.size(); ++b) {
    const auto& r = s.records[b];
    if (!r.converged) continue;
    for (std::size_t q = 0; q < s.quantities.size(); ++q) {
      const auto& qs = s.quantities[q];
      out << b << ',' << qs.variable << ',' << qs.level << ',' << qs.cluster + 1 << ',' << (qs.ratio ? "ROR" : "OR")
          << ',' << std::exp(r.log_values[q]) << '\n';
    }
  }
}

}  // namespace dropclust
