#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "dropclust/gower.hpp"

namespace dropclust {

/// k-medoids partition. Medoids are kept sorted by row index and cluster
/// label s (1-based) belongs to medoids[s - 1], so labels are canonical for a
/// given medoid set.
struct Partition {
  std::size_t k = 0;
  std::vector<std::size_t> medoids;
  std::vector<int> labels;
  double energy = 0.0;
  std::size_t restarts_used = 0;
  std::uint64_t seed = 0;
  std::size_t swaps = 0;

  std::size_t n() const { return labels.size(); }
  std::vector<std::size_t> cluster_sizes() const;
};

nlohmann::json to_json(const Partition& p);
Partition partition_from_json(const nlohmann::json& j);

/// Sum over rows of the dissimilarity to the nearest medoid.
double medoid_energy(const DissimilarityMatrix& m, std::span<const std::size_t> medoids);

/// Labels and energy for a fixed medoid set (ties go to the lower row index).
Partition make_partition(const DissimilarityMatrix& m, std::vector<std::size_t> medoids);

/// Greedy BUILD initialisation; deterministic, ties to the lowest index.
std::vector<std::size_t> pam_build(const DissimilarityMatrix& m, std::size_t k);

/// Energies after BUILD/initialisation and after every applied swap.
struct SwapTrace {
  std::vector<double> energy;
};

/// Steepest-descent SWAP: each iteration applies the single (medoid, candidate)
/// exchange with the largest energy decrease, until none decreases it.
Partition pam_swap(const DissimilarityMatrix& m, std::vector<std::size_t> medoids,
                   SwapTrace* trace = nullptr);

/// Multi-restart PAM. Restart 0 starts from BUILD, the others from uniformly
/// random medoid sets drawn from per-restart streams of `seed`. Returns the
/// lowest-energy result (first one on ties). Restarts run in parallel.
Partition pam_fit(const DissimilarityMatrix& m, std::size_t k, std::size_t restarts, std::uint64_t seed);

/// Same search executed on one thread; kept as the reference for pam_fit.
Partition pam_fit_serial(const DissimilarityMatrix& m, std::size_t k, std::size_t restarts,
                         std::uint64_t seed);

/// Label of the medoid nearest to a new point, given its dissimilarities to
/// the n training rows.
int assign_nearest_medoid(const Partition& part, std::span<const double> to_rows);

}  // namespace dropclust
