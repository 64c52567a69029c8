#include <doctest.h>

#include <cmath>

#include "dropclust/design.hpp"
#include "dropclust/error.hpp"
#include "support.hpp"

using namespace dropclust;

TEST_CASE("level codes") {
  CHECK(level_code(0, 3) == std::vector<double>{-1, -1});
  CHECK(level_code(1, 3) == std::vector<double>{1, 0});
  CHECK(level_code(2, 3) == std::vector<double>{0, 1});
  CHECK(level_code(0, 2) == std::vector<double>{-1});
  CHECK(level_code(0, 3, Coding::Reference) == std::vector<double>{0, 0});
  CHECK(level_code(2, 3, Coding::Reference) == std::vector<double>{0, 1});
  CHECK_THROWS_AS(level_code(1, 3, Coding::OneHot), Error);
}

TEST_CASE("interaction contrasts are products of feature and cluster codes") {
  const auto v = testsupport::categorical("region", {"n", "c", "s"});
  const auto r = fcode_row(v, "n", 1, 3);
  CHECK(r.main == std::vector<double>{-1, -1});
  CHECK(r.cluster == std::vector<double>{-1, -1});
  CHECK(r.interaction == std::vector<double>{1, 1, 1, 1});
  const auto r2 = fcode_row(v, 2, 2, 3);
  CHECK(r2.cluster == std::vector<double>{1, 0});
  CHECK(r2.interaction == std::vector<double>{0, 0, 1, 0});
  const auto c = fcode_row_continuous(2.5, 1, 2);
  CHECK(c.interaction == std::vector<double>{-2.5});
  CHECK_THROWS_AS(fcode_row(v, "west", 1, 3), Error);
}

TEST_CASE("expanded design layout, folding weights and raw entries") {
  const auto ds = testsupport::random_dataset(30, 1, {3}, 4);
  const std::size_t k = 2;
  const auto labels = testsupport::random_labels(30, k, 5);
  const auto d = build_design(ds, labels, k);
  // intercept + mains (1 + 3) + cluster (2) + composites (1+2+2) + (3+2+6)
  CHECK(d.m == 1 + 4 + 2 + 5 + 11);
  CHECK(d.groups.size() == 2 + 1 + 2);
  const auto& cat = d.features[1];
  CHECK(d.weight[cat.copy_x] == doctest::Approx(std::sqrt(2.0)));
  CHECK(d.weight[cat.copy_c] == doctest::Approx(std::sqrt(3.0)));
  const auto raw = d.dense(false);
  const auto folded = d.dense(true);
  for (std::size_t i = 0; i < 30; ++i) {
    const auto level = ds.level(i, 1);
    const auto s = static_cast<std::size_t>(labels[i] - 1);
    const auto r = static_cast<Eigen::Index>(i);
    CHECK(raw(r, 0) == 1.0);
    CHECK(raw(r, d.features[0].main) == ds.value(i, 0));
    CHECK(raw(r, cat.main + level) == 1.0);
    CHECK(raw(r, d.cluster + s) == 1.0);
    CHECK(raw(r, cat.copy_x + level) == 1.0);
    CHECK(raw(r, cat.copy_c + s) == 1.0);
    CHECK(raw(r, cat.xi + level * k + s) == 1.0);
    CHECK(raw.row(r).sum() == doctest::Approx(ds.value(i, 0) * 3 + 7));
    for (std::size_t c = 0; c < d.m; ++c)
      CHECK(folded(r, c) == doctest::Approx(raw(r, c) / d.weight[c]).epsilon(1e-15));
  }
}

TEST_CASE("identical rows share a pattern") {
  auto ds = testsupport::random_dataset(50, 0, {2, 2}, 8);
  const auto labels = testsupport::random_labels(50, 2, 1);
  const auto d = build_design(ds, labels, 2);
  CHECK(d.pattern_row.size() <= 8);
  for (std::size_t i = 0; i < 50; ++i) {
    const auto rep = d.pattern_row[d.pattern[i]];
    CHECK(ds.level(i, 0) == ds.level(rep, 0));
    CHECK(ds.level(i, 1) == ds.level(rep, 1));
    CHECK(labels[i] == labels[rep]);
  }
}

TEST_CASE("an empty cluster is reported") {
  const auto ds = testsupport::random_dataset(20, 1, {2}, 2);
  std::vector<int> labels(20, 1);
  labels[0] = 3;
  const auto d = build_design(ds, labels, 3);
  CHECK(!d.warnings.empty());
}
