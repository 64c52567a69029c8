#include "dropclust/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "dropclust/dataset.hpp"
#include "dropclust/design.hpp"
#include "dropclust/effects.hpp"
#include "dropclust/error.hpp"
#include "dropclust/gower.hpp"
#include "dropclust/pam.hpp"
#include "dropclust/random.hpp"
#include "dropclust/synth.hpp"

namespace fs = std::filesystem;

namespace dropclust {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

nlohmann::json meta(const RunConfig& cfg, const std::string& artifact) {
  return {{"artifact", artifact}, {"version", kArtifactVersion}, {"seed", cfg.seed}, {"config_hash", cfg.hash()}};
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_usage("cannot write " + path.string());
  out << text;
}

void write_json(const RunConfig& cfg, const std::string& name, nlohmann::json body) {
  body["meta"] = meta(cfg, name);
  write_text(cfg.out / name, body.dump(2) + "\n");
}

// CSV plus its metadata sidecar.
void write_csv_artifact(const RunConfig& cfg, const std::string& name, const std::string& text) {
  write_text(cfg.out / name, text);
  write_text(cfg.out / (name + ".meta.json"), meta(cfg, name).dump(2) + "\n");
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail_usage("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail_validation(path.string() + ": " + e.what());
  }
}

nlohmann::json read_artifact(const RunConfig& cfg, const std::string& name, const std::string& stage) {
  const auto path = cfg.out / name;
  if (!fs::exists(path))
    fail_usage("missing upstream artifact " + path.string() + "; run the '" + stage + "' stage first");
  return read_json(path);
}

Dataset load_data(const RunConfig& cfg) {
  if (cfg.input.empty() || cfg.schema.empty()) fail_usage("config needs 'input' and 'schema'");
  const auto schema = load_schema(cfg.schema.string());
  return load_csv(cfg.input.string(), schema);
}

struct Labels {
  std::vector<int> labels;
  std::size_t k = 0;
  std::optional<Partition> partition;
};

Labels load_labels(const RunConfig& cfg, const Dataset& ds) {
  Labels out;
  if (cfg.labels_from_data) {
    if (!ds.cluster_labels) fail_validation("config asks for labels from the data but the schema has no cluster-label column");
    out.labels = *ds.cluster_labels;
    for (int l : out.labels) out.k = std::max<std::size_t>(out.k, static_cast<std::size_t>(l));
    return out;
  }
  auto part = partition_from_json(read_artifact(cfg, "partition.json", "cluster"));
  if (part.n() != ds.n())
    fail_validation("partition.json has " + std::to_string(part.n()) + " labels but the data has " +
                    std::to_string(ds.n()) + " rows");
  out.labels = part.labels;
  out.k = part.k;
  out.partition = std::move(part);
  return out;
}

CvLoss loss_from(const std::string& s) {
  if (s == "deviance") return CvLoss::Deviance;
  if (s == "misclassification") return CvLoss::Misclassification;
  fail_usage("unknown cv loss '" + s + "'");
}

template <class T>
void take(const nlohmann::json& j, const char* key, T& into) {
  if (j.contains(key)) into = j.at(key).get<T>();
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  if (std::isnan(v)) return "NA";
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

void RunConfig::validate() const {
  if (k < 1) fail_usage("k must be at least 1");
  if (restarts < 1) fail_usage("restarts must be at least 1");
  if (stability.k_min < 2 || stability.k_max < stability.k_min) fail_usage("stability needs 2 <= k_min <= k_max");
  if (stability.replicates < 1 || stability.bootstrap_restarts < 1) fail_usage("stability counts must be at least 1");
  if (cv.grid_size < 1 || cv.folds < 2 || cv.repeats < 1) fail_usage("cv needs grid_size >= 1, folds >= 2, repeats >= 1");
  if (bootstrap.replicates < 1 || bootstrap.cv.repeats < 1) fail_usage("bootstrap counts must be at least 1");
  if (!(bootstrap.alpha > 0.0 && bootstrap.alpha < 0.5)) fail_usage("alpha must lie in (0, 0.5)");
  if (!(inclusion_threshold > 0.0 && inclusion_threshold <= 1.0)) fail_usage("inclusion threshold must lie in (0, 1]");
}

std::string RunConfig::hash() const {
  nlohmann::json j = source;
  j.erase("out");
  j.erase("workers");
  j["seed"] = seed;
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(j.dump());
  return os.str();
}

std::uint64_t RunConfig::stability_seed() const { return stream_seed(seed, {10}); }
std::uint64_t RunConfig::cv_seed() const { return stream_seed(seed, {11}); }
std::uint64_t RunConfig::bootstrap_seed() const { return stream_seed(seed, {12}); }
std::uint64_t RunConfig::synth_seed() const { return stream_seed(seed, {13}); }

RunConfig parse_config(const nlohmann::json& j, const fs::path& base) {
  RunConfig c;
  c.source = j;
  try {
    if (j.contains("input")) c.input = resolve(base, j["input"].get<std::string>());
    if (j.contains("schema")) c.schema = resolve(base, j["schema"].get<std::string>());
    if (j.contains("synthetic")) c.synthetic = resolve(base, j["synthetic"].get<std::string>());
    if (j.contains("predict")) c.predict_input = resolve(base, j["predict"].get<std::string>());
    if (j.contains("out")) c.out = resolve(base, j["out"].get<std::string>());
    take(j, "seed", c.seed);
    take(j, "include_outcome", c.include_outcome);
    if (j.contains("labels")) {
      const auto l = j["labels"].get<std::string>();
      if (l != "data" && l != "partition") fail_usage("'labels' must be 'data' or 'partition'");
      c.labels_from_data = l == "data";
    }
    if (j.contains("cluster")) {
      take(j["cluster"], "k", c.k);
      take(j["cluster"], "restarts", c.restarts);
    }
    if (j.contains("stability")) {
      const auto& s = j["stability"];
      take(s, "k_min", c.stability.k_min);
      take(s, "k_max", c.stability.k_max);
      take(s, "replicates", c.stability.replicates);
      take(s, "bootstrap_restarts", c.stability.bootstrap_restarts);
    }
    if (j.contains("fit")) {
      const auto& f = j["fit"];
      take(f, "grid_size", c.cv.grid_size);
      take(f, "ratio", c.cv.ratio);
      take(f, "folds", c.cv.folds);
      take(f, "repeats", c.cv.repeats);
      take(f, "heuristic_max", c.cv.heuristic_max);
      take(f, "tol", c.cv.solver.tol);
      take(f, "max_iter", c.cv.solver.max_iter);
      if (f.contains("loss")) c.cv.loss = loss_from(f["loss"].get<std::string>());
    }
    c.bootstrap.cv = c.cv;
    c.bootstrap.cv.repeats = 1;
    if (j.contains("bootstrap")) {
      const auto& b = j["bootstrap"];
      take(b, "replicates", c.bootstrap.replicates);
      take(b, "alpha", c.bootstrap.alpha);
      take(b, "cv_repeats", c.bootstrap.cv.repeats);
      take(b, "grid_size", c.bootstrap.cv.grid_size);
      take(b, "folds", c.bootstrap.cv.folds);
      take(b, "jackknife_groups", c.bootstrap.jackknife_groups);
      take(b, "recluster_per_replicate", c.bootstrap.recluster_per_replicate);
      take(b, "recluster_restarts", c.bootstrap.recluster_restarts);
      take(b, "threshold", c.inclusion_threshold);
      take(b, "replicate_csv", c.replicate_csv);
    }
    if (j.contains("effects")) take(j["effects"], "standardized_units", c.standardized_units);
  } catch (const nlohmann::json::exception& e) {
    fail_usage(std::string("config: ") + e.what());
  }
  if (c.input.empty() && !c.synthetic.empty()) c.input = c.out / "data.csv";
  if (c.schema.empty() && !c.synthetic.empty()) c.schema = c.out / "schema.json";
  c.stability.restarts = c.restarts;
  c.bootstrap.standardized_units = c.standardized_units;
  c.validate();
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail_usage("cannot read config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail_usage("config " + path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

void cmd_synthesize(const RunConfig& cfg) {
  if (cfg.synthetic.empty()) fail_usage("config needs 'synthetic' (path to a synthetic spec)");
  const auto spec = parse_synthetic_spec(read_json(cfg.synthetic));
  const auto data = synthesize(spec, cfg.synth_seed());
  std::ostringstream csv;
  write_csv(csv, data.data);
  write_csv_artifact(cfg, "data.csv", csv.str());
  write_text(cfg.out / "schema.json", schema_to_json(data.schema).dump(2) + "\n");
  write_json(cfg, "truth.json", {{"spec", to_json(spec)}, {"model", to_json(data.truth)}});
}

void cmd_cluster(const RunConfig& cfg) {
  const auto ds = load_data(cfg);
  const auto geometry = GowerGeometry::fit(ds, cfg.include_outcome);
  const auto m = gower_dissimilarity(ds, geometry);
  if (cfg.k > ds.n()) fail_usage("k exceeds the number of rows");
  const auto part = pam_fit(m, cfg.k, cfg.restarts, stability_fit_seed(cfg.stability_seed(), cfg.k));
  write_json(cfg, "geometry.json", to_json(geometry));
  write_json(cfg, "partition.json", to_json(part));
  std::ostringstream csv;
  csv << "row,cluster\n";
  for (std::size_t i = 0; i < part.n(); ++i) csv << i << ',' << part.labels[i] << '\n';
  write_csv_artifact(cfg, "labels.csv", csv.str());
}

void cmd_stability(const RunConfig& cfg) {
  const auto ds = load_data(cfg);
  const auto geometry = GowerGeometry::fit(ds, cfg.include_outcome);
  const auto m = gower_dissimilarity(ds, geometry);
  StabilityConfig sc = cfg.stability;
  sc.seed = cfg.stability_seed();
  if (sc.k_max >= ds.n()) fail_usage("stability needs k_max < n");
  const auto report = stability_curve(m, sc);
  write_json(cfg, "stability.json", to_json(report));
  std::ostringstream csv;
  write_stability_csv(csv, report);
  write_csv_artifact(cfg, "stability.csv", csv.str());
  // The selected partition replaces any earlier clustering.
  write_json(cfg, "geometry.json", to_json(geometry));
  write_json(cfg, "partition.json", to_json(report.selected()));
}

void cmd_fit(const RunConfig& cfg) {
  const auto ds = load_data(cfg);
  const auto lab = load_labels(cfg, ds);
  const auto [sds, report] = standardize_continuous(ds);
  const auto design = build_design(sds, lab.labels, lab.k);
  CvOptions cv = cfg.cv;
  cv.seed = cfg.cv_seed();
  const auto res = cv_select(design, sds.y, {}, cv);
  const auto standardized = recover_params(design, res.best().coef);
  const auto model = to_original_units(standardized, report);
  const auto heuristic = to_original_units(recover_params(design, res.heuristic().coef), report);

  nlohmann::json body = {{"k", lab.k},
                         {"labels_from_data", cfg.labels_from_data},
                         {"lambda_max", res.path.lambda_max},
                         {"lambda_cv", res.lambda_cv},
                         {"lambda_heuristic", res.lambda_heuristic},
                         {"converged", res.best().converged},
                         {"standardization", to_json(report)},
                         {"model", to_json(model)},
                         {"model_standardized", to_json(standardized)},
                         {"heuristic_model", to_json(heuristic)},
                         {"coefficients", res.best().coef},
                         {"cv", to_json(res)},
                         {"warnings", design.warnings}};
  write_json(cfg, "fit.json", body);
  write_json(cfg, "design.json", design.layout_json());
  std::ostringstream csv;
  write_cv_csv(csv, res);
  write_csv_artifact(cfg, "cv.csv", csv.str());
}

void cmd_effects(const RunConfig& cfg) {
  const auto fit = read_artifact(cfg, "fit.json", "fit");
  const auto model = model_params_from_json(fit.at("model"));
  const auto table = effect_table(model, cfg.standardized_units);
  nlohmann::json rows = to_json(table);
  for (std::size_t e = 0; e < table.size(); ++e) {
    nlohmann::json text = nlohmann::json::array();
    for (std::size_t s = 1; s < table[e].clusters(); ++s) text.push_back(interpret(table[e], s));
    rows[e]["interpretation"] = text;
  }
  const auto heuristic = effect_table(model_params_from_json(fit.at("heuristic_model")), cfg.standardized_units);
  write_json(cfg, "effects.json",
             {{"standardized_units", cfg.standardized_units}, {"effects", rows}, {"heuristic_effects", to_json(heuristic)}});
  std::ostringstream csv;
  write_effects_csv(csv, table);
  write_csv_artifact(cfg, "effects.csv", csv.str());
}

void cmd_bootstrap(const RunConfig& cfg) {
  const auto fit = read_artifact(cfg, "fit.json", "fit");
  const auto ds = load_data(cfg);
  const auto lab = load_labels(cfg, ds);
  const auto [sds, report] = standardize_continuous(ds);
  const auto point = model_params_from_json(fit.at("model"));
  std::optional<DissimilarityMatrix> m;
  if (cfg.bootstrap.recluster_per_replicate) m = gower_dissimilarity(ds, cfg.include_outcome);

  BootstrapInput in;
  in.data = &sds;
  in.report = &report;
  in.labels = lab.labels;
  in.k = lab.k;
  in.dissimilarity = m ? &*m : nullptr;
  in.point = &point;
  BootstrapOptions opts = cfg.bootstrap;
  opts.seed = cfg.bootstrap_seed();
  opts.cv.seed = cfg.cv_seed();
  const auto summary = bootstrap_run(in, opts);
  const auto screen = inclusion_screen(summary, cfg.inclusion_threshold);

  nlohmann::json body = to_json(summary);
  nlohmann::json retained = nlohmann::json::array(), dropped = nlohmann::json::array();
  for (const auto& t : screen.retained) retained.push_back(t.name);
  for (const auto& t : screen.dropped) dropped.push_back(t.name);
  nlohmann::json excluding = nlohmann::json::array();
  for (const auto& q : significance_table(summary))
    if (q.significant)
      excluding.push_back({{"variable", q.variable}, {"level", q.level}, {"cluster", q.cluster + 1},
                           {"quantity", q.ratio ? "ROR" : "OR"}});
  body["screen"] = {{"threshold", cfg.inclusion_threshold},
                    {"zero_proportion", {{"retained", retained}, {"dropped", dropped}}},
                    {"interval_excludes_one", excluding}};
  write_json(cfg, "bootstrap.json", body);
  std::ostringstream csv;
  write_bootstrap_csv(csv, summary);
  write_csv_artifact(cfg, "bootstrap.csv", csv.str());
  if (cfg.replicate_csv) {
    std::ostringstream reps;
    write_replicates_csv(reps, summary);
    write_csv_artifact(cfg, "replicates.csv", reps.str());
  }
}

void cmd_predict(const RunConfig& cfg) {
  if (cfg.predict_input.empty()) fail_usage("predict needs rows to score ('predict' in the config or --rows)");
  if (cfg.labels_from_data) fail_usage("predict assigns clusters by medoid and needs a PAM partition");
  const auto ds = load_data(cfg);
  const auto fit = read_artifact(cfg, "fit.json", "fit");
  const auto lab = load_labels(cfg, ds);
  const auto geometry = gower_geometry_from_json(read_artifact(cfg, "geometry.json", "cluster"));
  const auto model = model_params_from_json(fit.at("model"));
  const auto rows = load_scoring_csv(cfg.predict_input.string(), ds);

  std::ostringstream csv;
  csv << "row,cluster,probability,status\n";
  csv << std::setprecision(12);
  std::vector<double> x(ds.p());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (!rows.problem[r].empty()) {
      csv << r << ",NA,NA," << '"' << rows.problem[r] << '"' << '\n';
      continue;
    }
    for (std::size_t j = 0; j < ds.p(); ++j) x[j] = rows.values[j][r];
    const auto d = gower_to_rows(ds, geometry, x, rows.y[r]);
    const int label = assign_nearest_medoid(*lab.partition, d);
    const double eta = model.linear_predictor(x, label);
    const double prob = eta >= 0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
    csv << r << ',' << label << ',' << prob << ",ok\n";
  }
  write_csv_artifact(cfg, "predict.csv", csv.str());
}

void cmd_report(const RunConfig& cfg) {
  std::ostringstream os;
  os << "dropclust report (seed " << cfg.seed << ", config " << cfg.hash() << ")\n\n";
  const auto has = [&](const char* name) { return fs::exists(cfg.out / name); };
  if (!has("partition.json") && !has("fit.json") && !cfg.labels_from_data)
    fail_usage("nothing to report in " + cfg.out.string() + "; run 'cluster' or 'stability' first");
  if (has("stability.json")) {
    const auto st = read_json(cfg.out / "stability.json");
    os << "Cluster stability (B = " << st["replicates"] << ")\n";
    for (const auto& row : st["per_k"])
      os << "  k = " << row["k"] << "  worst-case Jaccard "
         << (row["worst_case"].is_null() ? std::string("NA") : fixed(row["worst_case"].get<double>()))
         << "  energy " << fixed(row["energy"].get<double>()) << '\n';
    os << "  selected k* = " << st["k_star"] << "\n\n";
  }
  if (has("partition.json")) {
    const auto part = partition_from_json(read_json(cfg.out / "partition.json"));
    os << "Partition: k = " << part.k << ", energy " << fixed(part.energy) << ", sizes";
    for (auto s : part.cluster_sizes()) os << ' ' << s;
    os << "\n\n";
  }
  if (has("fit.json")) {
    const auto fit = read_json(cfg.out / "fit.json");
    const auto model = model_params_from_json(fit["model"]);
    os << "Sparse fit: lambda_cv " << fit["lambda_cv"].get<double>() << " (lambda_max "
       << fit["lambda_max"].get<double>() << ")\n";
    for (const auto& f : model.features)
      os << "  " << f.variable.name << ": main " << (f.main_active ? "active" : "zero") << ", interaction "
         << (f.interaction_active ? "active" : "zero") << '\n';
    os << "  cluster main effect " << (model.cluster_active ? "active" : "zero") << "\n\n";
    os << "Odds ratios\n";
    for (const auto& e : effect_table(model, cfg.standardized_units)) {
      os << "  " << e.variable << (e.continuous ? " (unit increase)" : "=" + e.level) << ":";
      for (std::size_t s = 0; s < e.clusters(); ++s) os << "  C" << s + 1 << " " << fixed(e.odds_ratio(s));
      os << '\n';
      for (std::size_t s = 1; s < e.clusters(); ++s) os << "    " << interpret(e, s) << '\n';
    }
    os << '\n';
  }
  if (has("bootstrap.json")) {
    const auto bs = read_json(cfg.out / "bootstrap.json");
    os << "Bootstrap (B = " << bs["replicates"] << ", excluded " << bs["excluded"] << ", redraws "
       << bs["redraws"] << ")\n";
    for (const auto& t : bs["terms"])
      os << "  " << t["term"].get<std::string>() << ": zero in " << fixed(100.0 * t["zero_proportion"].get<double>(), 1)
         << "% of replicates\n";
    for (const auto& q : bs["quantities"]) {
      os << "  " << q["quantity"].get<std::string>() << ' ' << q["variable"].get<std::string>() << '='
         << q["level"].get<std::string>() << " C" << q["cluster"] << ": mean "
         << (q["mean"].is_null() ? std::string("NA") : fixed(q["mean"].get<double>())) << ", interval ("
         << (q["lower"].is_null() ? std::string("NA") : fixed(q["lower"].get<double>())) << ", "
         << (q["upper"].is_null() ? std::string("NA") : fixed(q["upper"].get<double>())) << ")"
         << (q["significant"].get<bool>() ? " *" : "") << '\n';
    }
  }
  write_text(cfg.out / "report.txt", os.str());
}

}  // namespace dropclust
