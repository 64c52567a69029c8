// Serial reference vs OpenMP kernels. Usage: bench_kernels [n] [threads]

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>

#include "dropclust/bootstrap.hpp"
#include "dropclust/gower.hpp"
#include "dropclust/pam.hpp"
#include "dropclust/random.hpp"
#include "dropclust/stability.hpp"
#include "dropclust/synth.hpp"

using namespace dropclust;

namespace {

double seconds(const std::function<void()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

SyntheticSpec bench_spec(std::size_t n) {
  return parse_synthetic_spec(nlohmann::json::parse(R"({
    "n": )" + std::to_string(n) + R"(, "k": 2, "weights": [0.5, 0.5],
    "outcome": {"name": "y", "levels": ["0", "1"]},
    "features": [
      {"name": "age", "kind": "continuous", "mean": [45, 60], "sd": [9, 9]},
      {"name": "bmi", "kind": "continuous", "mean": [24, 28], "sd": [3, 4]},
      {"name": "smoker", "kind": "categorical", "levels": ["no", "yes"], "probs": [[0.7, 0.3], [0.4, 0.6]]},
      {"name": "stage", "kind": "categorical", "levels": ["I", "II", "III"], "probs": [[0.5, 0.3, 0.2], [0.2, 0.3, 0.5]]}],
    "truth": {"intercept": -0.3, "gamma": [0.2], "beta": {"smoker": [0.4]}, "theta": {"smoker": [0.3]}}})"));
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t n = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 2000;
  const int threads = argc > 2 ? std::atoi(argv[2]) : omp_get_max_threads();
  omp_set_num_threads(threads);
  std::printf("n = %zu, threads = %d\n", n, threads);

  const auto data = synthesize(bench_spec(n), 1);
  const auto& ds = data.data;
  const auto g = GowerGeometry::fit(ds, true);

  DissimilarityMatrix m;
  const double gs = seconds([&] { m = gower_dissimilarity_serial(ds, g); });
  const double gp = seconds([&] { m = gower_dissimilarity(ds, g); });
  std::printf("%-28s serial %8.3f s   parallel %8.3f s\n", "gower", gs, gp);

  const double ps = seconds([&] { pam_fit_serial(m, 3, 8, 7); });
  const double pp = seconds([&] { pam_fit(m, 3, 8, 7); });
  std::printf("%-28s serial %8.3f s   parallel %8.3f s\n", "pam (k=3, 8 restarts)", ps, pp);

  StabilityConfig cfg;
  cfg.k_min = 2;
  cfg.k_max = 4;
  cfg.replicates = 20;
  cfg.restarts = 4;
  cfg.bootstrap_restarts = 2;
  omp_set_num_threads(1);
  const double ss = seconds([&] { stability_curve(m, cfg); });
  omp_set_num_threads(threads);
  const double sp = seconds([&] { stability_curve(m, cfg); });
  std::printf("%-28s 1 thread %6.3f s   %d threads %6.3f s\n", "stability (k=2..4, B=20)", ss, threads, sp);

  const auto [sds, rep] = standardize_continuous(ds);
  const auto& labels = *ds.cluster_labels;
  const auto design = build_design(sds, labels, 2);
  CvOptions cv;
  cv.grid_size = 20;
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
  opts.replicates = 20;
  opts.cv = cv;
  opts.jackknife_groups = 5;
  omp_set_num_threads(1);
  const double bs = seconds([&] { bootstrap_run(in, opts); });
  omp_set_num_threads(threads);
  const double bp = seconds([&] { bootstrap_run(in, opts); });
  std::printf("%-28s 1 thread %6.3f s   %d threads %6.3f s\n", "bootstrap (B=20)", bs, threads, bp);
  return 0;
}
