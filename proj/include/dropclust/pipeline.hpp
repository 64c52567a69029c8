#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "dropclust/bootstrap.hpp"
#include "dropclust/glasso.hpp"
#include "dropclust/stability.hpp"

namespace dropclust {

inline constexpr const char* kArtifactVersion = "1";

/// Settings of a staged run. Relative paths resolve against the directory of
/// the config file.
struct RunConfig {
  std::filesystem::path input;
  std::filesystem::path schema;
  std::filesystem::path synthetic;      // spec for `synthesize`
  std::filesystem::path predict_input;
  std::filesystem::path out = "out";
  std::uint64_t seed = 1;
  bool include_outcome = true;
  bool labels_from_data = false;        // use the cluster-label column instead of PAM
  std::size_t k = 2;
  std::size_t restarts = 50;
  StabilityConfig stability;
  CvOptions cv;
  BootstrapOptions bootstrap;
  double inclusion_threshold = 0.10;
  bool replicate_csv = true;
  bool standardized_units = false;
  nlohmann::json source;                // config as read, for the hash

  void validate() const;
  /// FNV-1a hash of the effective settings (output directory excluded).
  std::string hash() const;

  std::uint64_t stability_seed() const;
  std::uint64_t cv_seed() const;
  std::uint64_t bootstrap_seed() const;
  std::uint64_t synth_seed() const;
};

RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

void cmd_synthesize(const RunConfig& cfg);
void cmd_cluster(const RunConfig& cfg);
void cmd_stability(const RunConfig& cfg);
void cmd_fit(const RunConfig& cfg);
void cmd_effects(const RunConfig& cfg);
void cmd_bootstrap(const RunConfig& cfg);
void cmd_predict(const RunConfig& cfg);
void cmd_report(const RunConfig& cfg);

}  // namespace dropclust
