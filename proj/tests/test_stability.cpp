#include <doctest.h>

#include <cmath>

#include "dropclust/random.hpp"
#include "dropclust/stability.hpp"
#include "support.hpp"

using namespace dropclust;

namespace {

Dataset two_blobs(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset ds;
  ds.features = {testsupport::continuous("a"), testsupport::continuous("b")};
  ds.outcome = testsupport::binary_outcome();
  ds.values.assign(2, std::vector<double>(n));
  ds.y.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = i % 2 == 0 ? 0.0 : 6.0;
    ds.values[0][i] = c + rng.normal();
    ds.values[1][i] = c + rng.normal();
    ds.y[i] = rng.bernoulli(0.5) ? 1 : 0;
  }
  ds.y[0] = 0, ds.y[1] = 1;
  return ds;
}

}  // namespace

TEST_CASE("Jaccard of explicit sets") {
  const std::vector<std::size_t> a = {1, 2, 3, 4}, b = {3, 4, 5}, e = {};
  CHECK(jaccard(a, b) == doctest::Approx(2.0 / 5.0));
  CHECK(jaccard(a, a) == 1.0);
  CHECK(jaccard(a, std::vector<std::size_t>{9}) == 0.0);
  CHECK(jaccard(std::vector<std::size_t>{3, 3, 1}, std::vector<std::size_t>{1, 3}) == 1.0);
  CHECK(jaccard(e, b) == 0.0);
}

TEST_CASE("a replicate containing every row reproduces the clustering") {
  const auto ds = two_blobs(60, 4);
  const auto m = gower_dissimilarity(ds, false);
  const auto p = pam_fit(m, 2, 5, 3);
  std::vector<std::size_t> all(60);
  for (std::size_t i = 0; i < 60; ++i) all[i] = i;
  const auto r = replicate_similarity_on(p, m, all, 5, 3);
  for (const auto& v : r.per_cluster) CHECK(v.value() == doctest::Approx(1.0));
}

TEST_CASE("restricted similarity only counts sampled members") {
  const auto ds = two_blobs(40, 6);
  const auto m = gower_dissimilarity(ds, false);
  const auto p = pam_fit(m, 2, 5, 3);
  std::vector<std::size_t> sample;
  for (std::size_t i = 0; i < 40; ++i)
    if (p.labels[i] == 1) sample.push_back(i);
  sample.push_back(p.medoids[1]);
  sample.push_back(p.medoids[1] == 39 ? 38 : 39);
  const auto r = replicate_similarity_on(p, m, sample, 3, 1);
  REQUIRE(r.per_cluster.size() == 2);
  CHECK(r.per_cluster[0].has_value());
}

TEST_CASE("two separated blobs give k* = 2") {
  const auto ds = two_blobs(200, 12);
  const auto m = gower_dissimilarity(ds, false);
  StabilityConfig cfg;
  cfg.k_min = 2;
  cfg.k_max = 5;
  cfg.replicates = 20;
  cfg.restarts = 5;
  cfg.bootstrap_restarts = 2;
  cfg.seed = 5;
  const auto r = stability_curve(m, cfg);
  CHECK(r.k_star == 2);
  CHECK(r.worst_case[0] > 0.95);
  CHECK(r.selected().k == 2);
  CHECK(r.partitions[0].labels == pam_fit(m, 2, cfg.restarts, stability_fit_seed(cfg.seed, 2)).labels);
}

TEST_CASE("stability is reproducible and independent of thread count") {
  const auto ds = two_blobs(80, 13);
  const auto m = gower_dissimilarity(ds, false);
  StabilityConfig cfg;
  cfg.k_max = 4;
  cfg.replicates = 10;
  cfg.restarts = 3;
  cfg.bootstrap_restarts = 2;
  const auto a = to_json(stability_curve(m, cfg)).dump();
  CHECK(to_json(stability_curve(m, cfg)).dump() == a);
}
