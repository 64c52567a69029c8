#include <doctest.h>

#include <omp.h>

#include <algorithm>
#include <cmath>

#include "dropclust/bootstrap.hpp"
#include "dropclust/synth.hpp"
#include "support.hpp"

using namespace dropclust;

TEST_CASE("type-7 quantiles") {
  const std::vector<double> v = {1, 2, 3, 4};
  CHECK(quantile_sorted(v, 0.0) == 1.0);
  CHECK(quantile_sorted(v, 1.0) == 4.0);
  CHECK(quantile_sorted(v, 0.3) == doctest::Approx(1.9));
  CHECK(quantile_sorted(v, 0.5) == doctest::Approx(2.5));
}

TEST_CASE("normal cdf and quantile") {
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-14));
  CHECK(normal_cdf(0.0) == 0.5);
  for (double p : {0.001, 0.1, 0.42, 0.9}) CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-13));
}

TEST_CASE("acceleration from jackknife values") {
  const std::vector<double> j = {1.0, 2.0, 4.0, 8.0};
  const double m = 15.0 / 4.0;
  double num = 0, den = 0;
  for (double x : j) num += std::pow(m - x, 3), den += std::pow(m - x, 2);
  CHECK(jackknife_acceleration(j) == doctest::Approx(num / (6.0 * std::pow(den, 1.5))).epsilon(1e-14));
  const std::vector<double> flat = {2.0, 2.0, 2.0};
  CHECK(jackknife_acceleration(flat) == 0.0);
}

TEST_CASE("symmetric replicates make BCa the percentile interval") {
  std::vector<double> reps;
  Rng rng(4);
  for (int b = 0; b < 500; ++b) {
    const double d = rng.normal();
    reps.push_back(1.0 + d);
    reps.push_back(1.0 - d);
  }
  const std::vector<double> jack = {0.5, 1.5, 0.8, 1.2, 1.0};
  const auto bca = bca_interval(reps, 1.0, 0.05, jack);
  const auto pct = percentile_interval(reps, 0.05);
  CHECK(bca.z0 == 0.0);
  CHECK(bca.a == 0.0);
  CHECK(bca.lower == pct.first);
  CHECK(bca.upper == pct.second);
}

TEST_CASE("bias correction shifts the interval towards the point estimate's side") {
  std::vector<double> reps;
  for (int b = 0; b < 1000; ++b) reps.push_back(static_cast<double>(b) / 1000.0);
  const auto shifted = bca_interval_with(reps, 0.1, 0.3, 0.0);
  const auto plain = bca_interval_with(reps, 0.1, 0.0, 0.0);
  CHECK(shifted.lower > plain.lower);
  CHECK(shifted.upper > plain.upper);
  CHECK(plain.lower == doctest::Approx(quantile_sorted(reps, 0.05)));
}

TEST_CASE("degenerate replicates are flagged") {
  const std::vector<double> reps(50, 0.0);
  const auto r = bca_interval(reps, 0.0, 0.05, std::vector<double>(5, 0.0));
  CHECK(r.lower == 0.0);
  CHECK(r.upper == 0.0);
}

namespace {

BootstrapSummary small_run(std::size_t replicates) {
  const auto spec = parse_synthetic_spec(nlohmann::json::parse(R"({
    "n": 400, "k": 2, "weights": [1, 1],
    "outcome": {"name": "y", "levels": ["0", "1"]},
    "features": [
      {"name": "a", "kind": "categorical", "levels": ["n", "y"], "probs": [[0.5, 0.5], [0.5, 0.5]]},
      {"name": "b", "kind": "categorical", "levels": ["p", "q", "r"], "probs": [[0.3, 0.3, 0.4], [0.4, 0.3, 0.3]]}],
    "truth": {"intercept": 0, "gamma": [0.1], "beta": {"a": [0.5], "b": [0.0, 0.0]}, "theta": {"a": [0.4]}}})"));
  const auto data = synthesize(spec, 9);
  const auto [sds, rep] = standardize_continuous(data.data);
  const auto& labels = *data.data.cluster_labels;
  const auto design = build_design(sds, labels, 2);
  CvOptions cv;
  cv.grid_size = 15;
  cv.folds = 5;
  cv.repeats = 1;
  const auto point = fit_sparse(design, sds, rep, {}, cv).params;
  BootstrapInput in;
  in.data = &sds;
  in.report = &rep;
  in.labels = labels;
  in.k = 2;
  in.point = &point;
  BootstrapOptions opts;
  opts.replicates = replicates;
  opts.cv = cv;
  opts.jackknife_groups = 5;
  opts.seed = 3;
  return bootstrap_run(in, opts);
}

}  // namespace

TEST_CASE("bootstrap runs are reproducible, prefix-stable and thread-count independent") {
  omp_set_num_threads(1);
  const auto one = small_run(12);
  omp_set_num_threads(2);
  const auto two = small_run(12);
  CHECK(to_json(one).dump() == to_json(two).dump());
  const auto longer = small_run(16);
  for (std::size_t b = 0; b < 12; ++b) CHECK(longer.records[b].log_values == one.records[b].log_values);
  CHECK(one.terms.size() == 2 + 1 + 2);
  for (const auto& q : one.quantities)
    if (!q.degenerate) CHECK(q.lower <= q.upper);
}

TEST_CASE("inclusion screen splits on the zero proportion") {
  BootstrapSummary s;
  s.terms = {{TermKind::Main, 0, "a", 0.0},
             {TermKind::Main, 1, "b", 0.5},
             {TermKind::Cluster, 0, "cluster", 0.05},
             {TermKind::Interaction, 0, "a:cluster", 0.09},
             {TermKind::Interaction, 1, "b:cluster", 0.6}};
  const auto screen = inclusion_screen(s, 0.10);
  CHECK(screen.retained.size() == 3);
  CHECK(screen.dropped.size() == 2);
}
