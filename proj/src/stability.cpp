#include "dropclust/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "dropclust/error.hpp"
#include "dropclust/random.hpp"

namespace dropclust {

double jaccard(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  std::vector<std::size_t> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  x.erase(std::unique(x.begin(), x.end()), x.end());
  std::sort(y.begin(), y.end());
  y.erase(std::unique(y.begin(), y.end()), y.end());
  if (x.empty() && y.empty()) fail_usage("Jaccard index of two empty sets is undefined");
  std::vector<std::size_t> inter;
  std::set_intersection(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(inter));
  const double i = static_cast<double>(inter.size());
  return i / (static_cast<double>(x.size() + y.size()) - i);
}

ReplicateSimilarity replicate_similarity_on(const Partition& original, const DissimilarityMatrix& m,
                                            std::vector<std::size_t> sample, std::size_t restarts,
                                            std::uint64_t pam_seed) {
  if (original.n() != m.size()) fail_usage("partition and dissimilarity matrix sizes differ");
  std::sort(sample.begin(), sample.end());
  sample.erase(std::unique(sample.begin(), sample.end()), sample.end());
  const std::size_t k = original.k;
  if (sample.size() < k)
    fail_numerical("bootstrap sample has " + std::to_string(sample.size()) + " distinct points, fewer than k = " +
                   std::to_string(k));

  const auto refit = pam_fit(m.submatrix(sample), k, restarts, pam_seed);

  // Contingency table between original clusters (restricted) and refit clusters.
  std::vector<std::size_t> table(k * k, 0), orig_size(k, 0), boot_size(k, 0);
  for (std::size_t a = 0; a < sample.size(); ++a) {
    const auto c = static_cast<std::size_t>(original.labels[sample[a]] - 1);
    const auto s = static_cast<std::size_t>(refit.labels[a] - 1);
    ++table[c * k + s];
    ++orig_size[c];
    ++boot_size[s];
  }
  ReplicateSimilarity out;
  out.per_cluster.assign(k, std::nullopt);
  for (std::size_t c = 0; c < k; ++c) {
    if (orig_size[c] == 0) continue;
    double best = 0.0;
    for (std::size_t s = 0; s < k; ++s) {
      const double inter = static_cast<double>(table[c * k + s]);
      const double uni = static_cast<double>(orig_size[c] + boot_size[s]) - inter;
      best = std::max(best, inter / uni);
    }
    out.per_cluster[c] = best;
  }
  out.sample = std::move(sample);
  return out;
}

ReplicateSimilarity replicate_similarity(const Partition& original, const DissimilarityMatrix& m,
                                         std::uint64_t sample_seed, std::size_t restarts,
                                         std::uint64_t pam_seed) {
  Rng rng(sample_seed);
  const std::size_t n = m.size();
  std::vector<std::size_t> draw(n);
  for (auto& d : draw) d = rng.below(n);
  return replicate_similarity_on(original, m, std::move(draw), restarts, pam_seed);
}

std::uint64_t stability_fit_seed(std::uint64_t seed, std::size_t k) { return stream_seed(seed, {0, k}); }
std::uint64_t stability_sample_seed(std::uint64_t seed, std::size_t b) { return stream_seed(seed, {1, b}); }
std::uint64_t stability_refit_seed(std::uint64_t seed, std::size_t b, std::size_t k) {
  return stream_seed(seed, {2, b, k});
}

const Partition& StabilityReport::selected() const {
  for (std::size_t i = 0; i < k_values.size(); ++i)
    if (k_values[i] == k_star) return partitions[i];
  fail_usage("stability report has no partition for k*");
}

StabilityReport stability_curve(const DissimilarityMatrix& m, const StabilityConfig& cfg) {
  if (cfg.k_min < 2 || cfg.k_max < cfg.k_min) fail_usage("stability needs 2 <= k_min <= k_max");
  if (cfg.k_max >= m.size()) fail_usage("stability needs k_max < n");
  if (cfg.replicates < 1) fail_usage("stability needs at least one bootstrap replicate");

  StabilityReport rep;
  rep.replicates = cfg.replicates;
  rep.seed = cfg.seed;
  for (std::size_t k = cfg.k_min; k <= cfg.k_max; ++k) {
    const Partition original = pam_fit(m, k, cfg.restarts, stability_fit_seed(cfg.seed, k));

    std::vector<ReplicateSimilarity> reps(cfg.replicates);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t sb = 0; sb < static_cast<std::ptrdiff_t>(cfg.replicates); ++sb) {
      const auto b = static_cast<std::size_t>(sb);
      reps[b] = replicate_similarity(original, m, stability_sample_seed(cfg.seed, b), cfg.bootstrap_restarts,
                                     stability_refit_seed(cfg.seed, b, k));
    }

    std::vector<double> mean(k, 0.0);
    std::vector<std::size_t> eff(k, 0);
    for (const auto& r : reps)
      for (std::size_t c = 0; c < k; ++c)
        if (r.per_cluster[c]) {
          mean[c] += *r.per_cluster[c];
          ++eff[c];
        }
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (eff[c] == 0) {
        mean[c] = std::numeric_limits<double>::quiet_NaN();
        rep.warnings.push_back("k=" + std::to_string(k) + ", cluster " + std::to_string(c + 1) +
                               ": no replicate drew any member (B_eff = 0); excluded");
        continue;
      }
      mean[c] /= static_cast<double>(eff[c]);
      worst = std::min(worst, mean[c]);
    }
    if (std::isinf(worst)) worst = std::numeric_limits<double>::quiet_NaN();

    rep.k_values.push_back(k);
    rep.cluster_jaccard.push_back(std::move(mean));
    rep.effective.push_back(std::move(eff));
    rep.worst_case.push_back(worst);
    rep.energy.push_back(original.energy);
    rep.partitions.push_back(original);
  }

  std::size_t best = rep.k_values.size();
  for (std::size_t i = 0; i < rep.k_values.size(); ++i) {
    if (std::isnan(rep.worst_case[i])) continue;
    if (best == rep.k_values.size() || rep.worst_case[i] > rep.worst_case[best]) best = i;
  }
  if (best == rep.k_values.size()) fail_numerical("stability: no k has a defined worst-case similarity");
  rep.k_star = rep.k_values[best];
  return rep;
}

nlohmann::json to_json(const StabilityReport& r) {
  nlohmann::json per_k = nlohmann::json::array();
  for (std::size_t i = 0; i < r.k_values.size(); ++i) {
    nlohmann::json clusters = nlohmann::json::array();
    for (std::size_t c = 0; c < r.cluster_jaccard[i].size(); ++c) {
      const double v = r.cluster_jaccard[i][c];
      clusters.push_back({{"cluster", c + 1},
                          {"jaccard", std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v)},
                          {"b_eff", r.effective[i][c]}});
    }
    const double w = r.worst_case[i];
    per_k.push_back({{"k", r.k_values[i]},
                     {"worst_case", std::isnan(w) ? nlohmann::json(nullptr) : nlohmann::json(w)},
                     {"energy", r.energy[i]},
                     {"clusters", clusters}});
  }
  return {{"replicates", r.replicates}, {"seed", r.seed},   {"k_star", r.k_star},
          {"per_k", per_k},             {"warnings", r.warnings}};
}

void write_stability_csv(std::ostream& out, const StabilityReport& r) {
  out << "k,worst_case_jaccard,energy\n";
  out.precision(17);
  for (std::size_t i = 0; i < r.k_values.size(); ++i) {
    out << r.k_values[i] << ',';
    if (std::isnan(r.worst_case[i])) out << "NA";
    else out << r.worst_case[i];
    out << ',' << r.energy[i] << '\n';
  }
}

}  // namespace dropclust
