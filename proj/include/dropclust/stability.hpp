#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dropclust/gower.hpp"
#include "dropclust/pam.hpp"

namespace dropclust {

/// |A ∩ B| / |A ∪ B|. Inputs need not be sorted; duplicates are ignored.
double jaccard(std::span<const std::size_t> a, std::span<const std::size_t> b);

/// Outcome of one bootstrap replicate for a fixed k: for every original
/// cluster, the best Jaccard match among the replicate's clusters, or nullopt
/// when none of the cluster's members was drawn.
struct ReplicateSimilarity {
  std::vector<std::optional<double>> per_cluster;
  std::vector<std::size_t> sample;  // distinct row indices, ascending
};

/// Draws n rows with replacement from stream `sample_seed`, removes repeated
/// draws, refits PAM with the original k on the restricted matrix and scores
/// each original cluster against the refit.
ReplicateSimilarity replicate_similarity(const Partition& original, const DissimilarityMatrix& m,
                                         std::uint64_t sample_seed, std::size_t restarts,
                                         std::uint64_t pam_seed);

/// Same scoring for an explicit set of distinct row indices.
ReplicateSimilarity replicate_similarity_on(const Partition& original, const DissimilarityMatrix& m,
                                            std::vector<std::size_t> sample, std::size_t restarts,
                                            std::uint64_t pam_seed);

struct StabilityConfig {
  std::size_t k_min = 2;
  std::size_t k_max = 8;
  std::size_t replicates = 100;
  std::size_t restarts = 50;            // fit on the full matrix
  std::size_t bootstrap_restarts = 5;   // fit inside every replicate
  std::uint64_t seed = 1;
};

struct StabilityReport {
  std::vector<std::size_t> k_values;
  std::size_t replicates = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<double>> cluster_jaccard;     // [k][cluster], NaN when B_eff = 0
  std::vector<std::vector<std::size_t>> effective;      // [k][cluster] B_eff
  std::vector<double> worst_case;                       // min over clusters per k
  std::vector<double> energy;                           // best PAM energy per k
  std::vector<Partition> partitions;                    // full-data fit per k
  std::size_t k_star = 0;
  std::vector<std::string> warnings;

  const Partition& selected() const;
};

/// Seeds used for the full-data fit and for replicate b, so that other
/// stages can reproduce the same partitions.
std::uint64_t stability_fit_seed(std::uint64_t seed, std::size_t k);
std::uint64_t stability_sample_seed(std::uint64_t seed, std::size_t b);
std::uint64_t stability_refit_seed(std::uint64_t seed, std::size_t b, std::size_t k);

/// Bootstrap Jaccard stability for k = k_min..k_max; k* maximises the
/// worst-case cluster similarity, smallest k on ties.
StabilityReport stability_curve(const DissimilarityMatrix& m, const StabilityConfig& cfg);

nlohmann::json to_json(const StabilityReport& r);
void write_stability_csv(std::ostream& out, const StabilityReport& r);

}  // namespace dropclust
