#include <CLI11.hpp>
#include <omp.h>

#include <filesystem>
#include <functional>
#include <iostream>
#include <map>

#include "dropclust/error.hpp"
#include "dropclust/pipeline.hpp"

namespace dc = dropclust;

int main(int argc, char** argv) {
  CLI::App app{"dropclust: cluster-specific effects of risk factors on a binary outcome"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string config;
  std::optional<std::uint64_t> seed;
  int workers = 0;
  std::string out;
  std::string rows;
  app.add_option("--config", config, "JSON run configuration")->required();
  app.add_option("--seed", seed, "root seed (overrides the config)");
  app.add_option("--workers", workers, "OpenMP threads (0 = runtime default)")->check(CLI::NonNegativeNumber);
  app.add_option("--out", out, "output directory (overrides the config)");

  const std::map<std::string, std::function<void(const dc::RunConfig&)>> stages = {
      {"synthesize", dc::cmd_synthesize}, {"cluster", dc::cmd_cluster}, {"stability", dc::cmd_stability},
      {"fit", dc::cmd_fit},               {"effects", dc::cmd_effects}, {"bootstrap", dc::cmd_bootstrap},
      {"predict", dc::cmd_predict},       {"report", dc::cmd_report}};
  const std::map<std::string, std::string> help = {
      {"synthesize", "draw a synthetic data set from a known model"},
      {"cluster", "Gower dissimilarity and PAM at a fixed k"},
      {"stability", "bootstrap Jaccard stability over a range of k; keeps k*"},
      {"fit", "hierarchical group-lasso logistic fit with cross-validation"},
      {"effects", "odds ratios and ratios of odds ratios per cluster"},
      {"bootstrap", "bootstrap inclusion proportions and BCa intervals"},
      {"predict", "assign new rows to clusters and score them"},
      {"report", "plain-text summary of the artifacts"}};
  for (const auto& [name, fn] : stages) {
    auto* sub = app.add_subcommand(name, help.at(name));
    if (name == "predict") sub->add_option("--rows", rows, "CSV of rows to score");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    auto cfg = dc::load_config(config);
    if (seed) cfg.seed = *seed;
    if (!out.empty()) cfg.out = out;
    if (!rows.empty()) cfg.predict_input = rows;
    if (workers > 0) omp_set_num_threads(workers);
    const auto name = app.get_subcommands().front()->get_name();
    stages.at(name)(cfg);
  } catch (const dc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
