#include "dropclust/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dropclust/error.hpp"
#include "dropclust/random.hpp"

namespace dropclust {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Continuous features first, declaration order within each kind.
std::vector<const FeatureGenerator*> ordered(const SyntheticSpec& spec) {
  std::vector<const FeatureGenerator*> out;
  for (const auto& f : spec.features)
    if (!f.variable.is_categorical()) out.push_back(&f);
  for (const auto& f : spec.features)
    if (f.variable.is_categorical()) out.push_back(&f);
  return out;
}

std::vector<double> contrasts_for(const std::map<std::string, std::vector<double>>& m, const std::string& name,
                                  std::size_t size) {
  auto it = m.find(name);
  if (it == m.end()) return std::vector<double>(size, 0.0);
  if (it->second.size() != size)
    fail_validation("coefficient block for '" + name + "' needs " + std::to_string(size) + " entries");
  return it->second;
}

bool nonzero(const std::vector<double>& v) {
  return std::any_of(v.begin(), v.end(), [](double x) { return x != 0.0; });
}

}  // namespace

void SyntheticSpec::validate() const {
  if (n < 2) fail_validation("synthetic spec needs n >= 2");
  if (k < 1) fail_validation("synthetic spec needs k >= 1");
  if (weights.size() != k) fail_validation("cluster weights need k entries");
  for (double w : weights)
    if (!(w > 0.0)) fail_validation("cluster weights must be positive (an empty cluster is degenerate)");
  if (outcome.levels.size() != 2) fail_validation("outcome needs exactly two levels");
  if (features.empty()) fail_validation("synthetic spec needs at least one feature");
  if (gamma.size() != (k >= 2 ? k - 1 : 0)) fail_validation("gamma needs k-1 entries");
  for (const auto& f : features) {
    const auto& v = f.variable;
    if (v.is_categorical()) {
      if (v.levels.size() < 2) fail_validation("categorical feature '" + v.name + "' needs at least two levels");
      if (f.probs.size() != k) fail_validation("feature '" + v.name + "' needs level probabilities per cluster");
      for (const auto& p : f.probs)
        if (p.size() != v.levels.size()) fail_validation("feature '" + v.name + "' has a probability row of the wrong size");
    } else {
      if (f.mean.size() != k || f.sd.size() != k) fail_validation("feature '" + v.name + "' needs mean and sd per cluster");
      for (double s : f.sd)
        if (!(s > 0.0)) fail_validation("feature '" + v.name + "' needs positive sd");
    }
  }
  const auto t = truth();
  if (!t.satisfies_hierarchy()) fail_validation("true coefficients violate strong hierarchy");
}

ModelParams SyntheticSpec::truth() const {
  ModelParams p;
  p.coding = Coding::SumToZero;
  p.k = k;
  p.intercept = intercept;
  if (k >= 2) {
    p.gamma = sum_to_zero_cells(gamma);
    p.gamma_na.assign(k, NaCause::None);
  }
  bool any_interaction = false;
  for (const auto* g : ordered(*this)) {
    FeatureParams f;
    f.variable = g->variable;
    const std::size_t L = f.variable.level_count();
    const bool cat = f.variable.is_categorical();
    const auto b = contrasts_for(beta, f.variable.name, cat ? L - 1 : 1);
    f.beta = cat ? sum_to_zero_cells(b) : b;
    if (k >= 2) {
      const auto th = contrasts_for(theta, f.variable.name, cat ? (L - 1) * (k - 1) : k - 1);
      f.theta = cat ? sum_to_zero_cells(th, L, k) : sum_to_zero_cells(th);
      f.interaction_active = nonzero(th);
    } else {
      f.interaction_active = false;
    }
    f.main_active = nonzero(b) || f.interaction_active;
    any_interaction = any_interaction || f.interaction_active;
    f.beta_na.assign(f.beta.size(), NaCause::None);
    f.theta_na.assign(f.theta.size(), NaCause::None);
    p.features.push_back(std::move(f));
  }
  p.cluster_active = nonzero(gamma) || any_interaction;
  return p;
}

SyntheticSpec parse_synthetic_spec(const nlohmann::json& j) {
  SyntheticSpec s;
  s.n = j.at("n").get<std::size_t>();
  s.k = j.at("k").get<std::size_t>();
  s.weights = j.contains("weights") ? j["weights"].get<std::vector<double>>() : std::vector<double>(s.k, 1.0);
  const auto& o = j.at("outcome");
  s.outcome.name = o.at("name").get<std::string>();
  s.outcome.kind = VariableKind::Categorical;
  s.outcome.role = VariableRole::Outcome;
  s.outcome.levels = o.at("levels").get<std::vector<std::string>>();
  for (const auto& jf : j.at("features")) {
    FeatureGenerator g;
    g.variable.name = jf.at("name").get<std::string>();
    const auto kind = jf.at("kind").get<std::string>();
    if (kind == "categorical") {
      g.variable.kind = VariableKind::Categorical;
      g.variable.levels = jf.at("levels").get<std::vector<std::string>>();
      g.probs = jf.at("probs").get<std::vector<std::vector<double>>>();
    } else if (kind == "continuous") {
      g.mean = jf.at("mean").get<std::vector<double>>();
      g.sd = jf.at("sd").get<std::vector<double>>();
      g.decimals = jf.value("decimals", -1);
    } else {
      fail_validation("unknown feature kind '" + kind + "'");
    }
    s.features.push_back(std::move(g));
  }
  const auto& t = j.at("truth");
  s.intercept = t.value("intercept", 0.0);
  s.gamma = t.contains("gamma") ? t["gamma"].get<std::vector<double>>() : std::vector<double>(s.k >= 2 ? s.k - 1 : 0, 0.0);
  if (t.contains("beta")) s.beta = t["beta"].get<std::map<std::string, std::vector<double>>>();
  if (t.contains("theta")) s.theta = t["theta"].get<std::map<std::string, std::vector<double>>>();
  s.validate();
  return s;
}

nlohmann::json to_json(const SyntheticSpec& s) {
  nlohmann::json feats = nlohmann::json::array();
  for (const auto& g : s.features) {
    if (g.variable.is_categorical())
      feats.push_back({{"name", g.variable.name}, {"kind", "categorical"}, {"levels", g.variable.levels}, {"probs", g.probs}});
    else
      feats.push_back({{"name", g.variable.name}, {"kind", "continuous"}, {"mean", g.mean}, {"sd", g.sd}, {"decimals", g.decimals}});
  }
  return {{"n", s.n},
          {"k", s.k},
          {"weights", s.weights},
          {"outcome", {{"name", s.outcome.name}, {"levels", s.outcome.levels}}},
          {"features", feats},
          {"truth", {{"intercept", s.intercept}, {"gamma", s.gamma}, {"beta", s.beta}, {"theta", s.theta}}}};
}

SyntheticData synthesize(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  SyntheticData out;
  out.truth = spec.truth();
  const auto gens = ordered(spec);
  const std::size_t p = gens.size();

  for (const auto* g : gens) out.schema.variables.push_back(g->variable);
  out.schema.variables.push_back(spec.outcome);
  VariableSchema label;
  label.name = "cluster";
  label.role = VariableRole::ClusterLabel;
  out.schema.variables.push_back(label);
  out.schema.event_level = spec.outcome.levels[1];

  Dataset& ds = out.data;
  for (const auto* g : gens) ds.features.push_back(g->variable);
  ds.outcome = spec.outcome;
  ds.event_index = 1;
  ds.values.assign(p, std::vector<double>(spec.n, 0.0));
  ds.y.assign(spec.n, 0);
  ds.cluster_labels.emplace(spec.n, 1);

  Rng rng(stream_seed(seed, {0x5e}));
  std::vector<double> row(p);
  std::vector<std::size_t> counts(spec.k, 0);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const std::size_t s = spec.k >= 2 ? rng.categorical(spec.weights) : 0;
    ++counts[s];
    for (std::size_t j = 0; j < p; ++j) {
      const auto& g = *gens[j];
      if (g.variable.is_categorical()) {
        row[j] = static_cast<double>(rng.categorical(g.probs[s]));
      } else {
        double v = g.mean[s] + g.sd[s] * rng.normal();
        if (g.decimals >= 0) {
          const double scale = std::pow(10.0, g.decimals);
          v = std::round(v * scale) / scale;
        }
        row[j] = v;
      }
      ds.values[j][i] = row[j];
    }
    const double eta = out.truth.linear_predictor(row, static_cast<int>(s + 1));
    ds.y[i] = rng.bernoulli(sigmoid(eta)) ? 1 : 0;
    (*ds.cluster_labels)[i] = static_cast<int>(s + 1);
  }
  for (std::size_t s = 0; s < spec.k; ++s)
    if (counts[s] == 0) fail_validation("synthetic draw left cluster " + std::to_string(s + 1) + " empty");
  ds.validate();
  return out;
}

}  // namespace dropclust
