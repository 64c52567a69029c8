#include "dropclust/pam.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "dropclust/error.hpp"
#include "dropclust/random.hpp"

namespace dropclust {

std::vector<std::size_t> Partition::cluster_sizes() const {
  std::vector<std::size_t> sizes(k, 0);
  for (int l : labels) ++sizes[static_cast<std::size_t>(l - 1)];
  return sizes;
}

nlohmann::json to_json(const Partition& p) {
  return {{"k", p.k},
          {"medoids", p.medoids},
          {"labels", p.labels},
          {"energy", p.energy},
          {"restarts_used", p.restarts_used},
          {"seed", p.seed},
          {"swaps", p.swaps}};
}

Partition partition_from_json(const nlohmann::json& j) {
  Partition p;
  p.k = j.at("k").get<std::size_t>();
  p.medoids = j.at("medoids").get<std::vector<std::size_t>>();
  p.labels = j.at("labels").get<std::vector<int>>();
  p.energy = j.at("energy").get<double>();
  p.restarts_used = j.value("restarts_used", std::size_t{1});
  p.seed = j.value("seed", std::uint64_t{0});
  p.swaps = j.value("swaps", std::size_t{0});
  if (p.medoids.size() != p.k) fail_validation("partition: medoid count differs from k");
  return p;
}

double medoid_energy(const DissimilarityMatrix& m, std::span<const std::size_t> medoids) {
  double e = 0.0;
  for (std::size_t o = 0; o < m.size(); ++o) {
    double best = std::numeric_limits<double>::infinity();
    for (auto md : medoids) best = std::min(best, m(o, md));
    e += best;
  }
  return e;
}

Partition make_partition(const DissimilarityMatrix& m, std::vector<std::size_t> medoids) {
  std::sort(medoids.begin(), medoids.end());
  Partition p;
  p.k = medoids.size();
  p.labels.assign(m.size(), 0);
  for (std::size_t o = 0; o < m.size(); ++o) {
    std::size_t best = 0;
    for (std::size_t s = 1; s < medoids.size(); ++s)
      if (m(o, medoids[s]) < m(o, medoids[best])) best = s;
    p.labels[o] = static_cast<int>(best + 1);
  }
  // A medoid always labels its own cluster, even when it duplicates another point.
  for (std::size_t s = 0; s < medoids.size(); ++s) p.labels[medoids[s]] = static_cast<int>(s + 1);
  p.medoids = std::move(medoids);
  p.energy = medoid_energy(m, p.medoids);
  return p;
}

namespace {

void check_k(const DissimilarityMatrix& m, std::size_t k) {
  if (k < 1) fail_usage("PAM needs k >= 1");
  if (k > m.size()) fail_usage("PAM needs k <= n (k = " + std::to_string(k) + ", n = " + std::to_string(m.size()) + ")");
}

}  // namespace

std::vector<std::size_t> pam_build(const DissimilarityMatrix& m, std::size_t k) {
  check_k(m, k);
  const std::size_t n = m.size();
  std::vector<bool> is_medoid(n, false);
  std::vector<std::size_t> medoids;

  std::size_t first = 0;
  double best_total = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < n; ++c) {
    double total = 0.0;
    for (std::size_t o = 0; o < n; ++o) total += m(o, c);
    if (total < best_total) {
      best_total = total;
      first = c;
    }
  }
  medoids.push_back(first);
  is_medoid[first] = true;
  std::vector<double> nearest(n);
  for (std::size_t o = 0; o < n; ++o) nearest[o] = m(o, first);

  while (medoids.size() < k) {
    std::size_t pick = n;
    double best_gain = -1.0;
    for (std::size_t c = 0; c < n; ++c) {
      if (is_medoid[c]) continue;
      double gain = 0.0;
      for (std::size_t o = 0; o < n; ++o) gain += std::max(0.0, nearest[o] - m(o, c));
      if (gain > best_gain) {
        best_gain = gain;
        pick = c;
      }
    }
    medoids.push_back(pick);
    is_medoid[pick] = true;
    for (std::size_t o = 0; o < n; ++o) nearest[o] = std::min(nearest[o], m(o, pick));
  }
  std::sort(medoids.begin(), medoids.end());
  return medoids;
}

Partition pam_swap(const DissimilarityMatrix& m, std::vector<std::size_t> medoids, SwapTrace* trace) {
  const std::size_t n = m.size();
  const std::size_t k = medoids.size();
  check_k(m, k);
  std::sort(medoids.begin(), medoids.end());
  if (std::adjacent_find(medoids.begin(), medoids.end()) != medoids.end())
    fail_usage("PAM medoid set contains duplicates");
  for (auto md : medoids)
    if (md >= n) fail_usage("PAM medoid index out of range");

  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<bool> is_medoid(n, false);
  for (auto md : medoids) is_medoid[md] = true;
  std::vector<std::size_t> near(n);
  std::vector<double> d1(n), d2(n);
  auto refresh = [&] {
    for (std::size_t o = 0; o < n; ++o) {
      double a = inf, b = inf;
      std::size_t ia = 0;
      for (std::size_t s = 0; s < k; ++s) {
        const double d = m(o, medoids[s]);
        if (d < a) {
          b = a;
          a = d;
          ia = s;
        } else if (d < b) {
          b = d;
        }
      }
      near[o] = ia;
      d1[o] = a;
      d2[o] = b;
    }
  };

  refresh();
  double energy = medoid_energy(m, medoids);
  if (trace) trace->energy.assign(1, energy);

  std::vector<double> delta(k);
  std::size_t swaps = 0;
  const std::size_t max_iter = 10 * n;
  for (std::size_t iter = 0;; ++iter) {
    if (iter >= max_iter) fail_numerical("PAM SWAP did not converge within 10*n iterations");
    double best = 0.0;
    std::size_t best_s = k, best_h = n;
    for (std::size_t h = 0; h < n; ++h) {
      if (is_medoid[h]) continue;
      // Removal loss per medoid position plus the gain shared by all positions.
      std::fill(delta.begin(), delta.end(), 0.0);
      double shared = 0.0;
      for (std::size_t o = 0; o < n; ++o) {
        const double doh = m(o, h);
        if (doh < d1[o]) shared += doh - d1[o];
        else delta[near[o]] += std::min(doh, d2[o]) - d1[o];
      }
      for (std::size_t s = 0; s < k; ++s) {
        const double total = shared + delta[s];
        const bool better = total < best ||
                            (total == best && best_s < k &&
                             (medoids[s] < medoids[best_s] || (medoids[s] == medoids[best_s] && h < best_h)));
        if (better) {
          best = total;
          best_s = s;
          best_h = h;
        }
      }
    }
    const double tol = 1e-12 * std::max(1.0, energy);
    if (best_s == k || !(best < -tol)) break;

    const std::size_t old = medoids[best_s];
    medoids[best_s] = best_h;
    const double new_energy = medoid_energy(m, medoids);
    if (!(new_energy < energy)) {
      medoids[best_s] = old;  // rounding noise only; keep the monotone trajectory
      break;
    }
    is_medoid[old] = false;
    is_medoid[best_h] = true;
    energy = new_energy;
    ++swaps;
    if (trace) trace->energy.push_back(energy);
    refresh();
  }

  Partition p = make_partition(m, std::move(medoids));
  p.swaps = swaps;
  p.restarts_used = 1;
  return p;
}

namespace {

std::vector<std::size_t> random_medoids(std::size_t n, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.below(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

Partition one_restart(const DissimilarityMatrix& m, std::size_t k, std::size_t r, std::uint64_t seed) {
  if (r == 0) return pam_swap(m, pam_build(m, k));
  return pam_swap(m, random_medoids(m.size(), k, stream_seed(seed, {r})));
}

Partition select_best(std::vector<Partition>& runs, std::size_t restarts, std::uint64_t seed) {
  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r)
    if (runs[r].energy < runs[best].energy) best = r;
  Partition out = std::move(runs[best]);
  out.restarts_used = restarts;
  out.seed = seed;
  return out;
}

}  // namespace

Partition pam_fit(const DissimilarityMatrix& m, std::size_t k, std::size_t restarts, std::uint64_t seed) {
  if (restarts < 1) fail_usage("PAM needs at least one restart");
  check_k(m, k);
  std::vector<Partition> runs(restarts);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(restarts); ++r)
    runs[static_cast<std::size_t>(r)] = one_restart(m, k, static_cast<std::size_t>(r), seed);
  return select_best(runs, restarts, seed);
}

Partition pam_fit_serial(const DissimilarityMatrix& m, std::size_t k, std::size_t restarts,
                         std::uint64_t seed) {
  if (restarts < 1) fail_usage("PAM needs at least one restart");
  check_k(m, k);
  std::vector<Partition> runs;
  for (std::size_t r = 0; r < restarts; ++r) runs.push_back(one_restart(m, k, r, seed));
  return select_best(runs, restarts, seed);
}

int assign_nearest_medoid(const Partition& part, std::span<const double> to_rows) {
  if (to_rows.size() != part.n())
    fail_usage("new point: expected " + std::to_string(part.n()) + " dissimilarities, got " +
               std::to_string(to_rows.size()));
  std::size_t best = 0;
  for (std::size_t s = 1; s < part.medoids.size(); ++s)
    if (to_rows[part.medoids[s]] < to_rows[part.medoids[best]]) best = s;
  return static_cast<int>(best + 1);
}

}  // namespace dropclust
