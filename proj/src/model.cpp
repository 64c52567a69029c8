#include "dropclust/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dropclust/error.hpp"

namespace dropclust {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool any_na(const std::vector<NaCause>& v) {
  return std::any_of(v.begin(), v.end(), [](NaCause c) { return c != NaCause::None; });
}

bool all_zero(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string coding_name(Coding c) {
  switch (c) {
    case Coding::SumToZero: return "sum-to-zero";
    case Coding::Reference: return "reference";
    case Coding::OneHot: return "one-hot";
  }
  return "one-hot";
}

Coding coding_from(const std::string& s) {
  if (s == "sum-to-zero") return Coding::SumToZero;
  if (s == "reference") return Coding::Reference;
  if (s == "one-hot") return Coding::OneHot;
  fail_validation("unknown coding '" + s + "'");
}

NaCause na_from(const std::string& s) {
  if (s == "aliased") return NaCause::Aliased;
  if (s == "separated") return NaCause::Separated;
  fail_validation("unknown NA cause '" + s + "'");
}

nlohmann::json values_json(const std::vector<double>& v, const std::vector<NaCause>& na) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i < na.size() && na[i] != NaCause::None) out.push_back(nullptr);
    else out.push_back(v[i]);
  }
  return out;
}

nlohmann::json causes_json(const std::vector<NaCause>& na) {
  nlohmann::json out = nlohmann::json::array();
  for (auto c : na) out.push_back(c == NaCause::None ? nlohmann::json(nullptr) : nlohmann::json(to_string(c)));
  return out;
}

void read_values(const nlohmann::json& j, std::vector<double>& v) {
  v.clear();
  for (const auto& x : j) v.push_back(x.is_null() ? kNaN : x.get<double>());
}

void read_causes(const nlohmann::json& j, std::size_t size, std::vector<NaCause>& na) {
  na.assign(size, NaCause::None);
  if (j.is_null()) return;
  for (std::size_t i = 0; i < j.size() && i < size; ++i)
    if (!j[i].is_null()) na[i] = na_from(j[i].get<std::string>());
}

}  // namespace

std::string to_string(NaCause c) {
  switch (c) {
    case NaCause::None: return "none";
    case NaCause::Aliased: return "aliased";
    case NaCause::Separated: return "separated";
  }
  return "none";
}

bool FeatureParams::has_na() const { return any_na(beta_na) || any_na(theta_na); }

bool ModelParams::has_na() const {
  if (intercept_na != NaCause::None || any_na(gamma_na)) return true;
  return std::any_of(features.begin(), features.end(), [](const FeatureParams& f) { return f.has_na(); });
}

double ModelParams::linear_predictor(std::span<const double> x, int cluster_label) const {
  if (x.size() != features.size()) fail_usage("row has " + std::to_string(x.size()) + " features, model has " +
                                              std::to_string(features.size()));
  std::size_t s = 0;
  if (k >= 2) {
    if (cluster_label < 1 || static_cast<std::size_t>(cluster_label) > k) fail_usage("cluster label outside 1..k");
    s = static_cast<std::size_t>(cluster_label - 1);
  }
  auto val = [](const std::vector<double>& v, const std::vector<NaCause>& na, std::size_t i) {
    return i < na.size() && na[i] != NaCause::None ? kNaN : v[i];
  };
  double eta = intercept_na == NaCause::None ? intercept : kNaN;
  if (!gamma.empty()) eta += val(gamma, gamma_na, s);
  for (std::size_t j = 0; j < features.size(); ++j) {
    const auto& f = features[j];
    if (f.variable.is_categorical()) {
      const auto a = static_cast<std::size_t>(x[j]);
      eta += val(f.beta, f.beta_na, a);
      if (!f.theta.empty()) eta += val(f.theta, f.theta_na, a * k + s);
    } else {
      double slope = val(f.beta, f.beta_na, 0);
      if (!f.theta.empty()) slope += val(f.theta, f.theta_na, s);
      eta += slope * x[j];
    }
  }
  return eta;
}

double ModelParams::sum_to_zero_violation() const {
  double worst = 0.0;
  auto upd = [&](double v) { worst = std::max(worst, std::abs(v)); };
  if (!gamma.empty()) upd(std::accumulate(gamma.begin(), gamma.end(), 0.0));
  for (const auto& f : features) {
    const std::size_t L = f.levels();
    if (f.variable.is_categorical()) upd(std::accumulate(f.beta.begin(), f.beta.end(), 0.0));
    if (f.theta.empty()) continue;
    for (std::size_t a = 0; a < L; ++a) {
      double row = 0.0;
      for (std::size_t s = 0; s < k; ++s) row += f.theta[a * k + s];
      upd(row);
    }
    if (f.variable.is_categorical()) {
      for (std::size_t s = 0; s < k; ++s) {
        double col = 0.0;
        for (std::size_t a = 0; a < L; ++a) col += f.theta[a * k + s];
        upd(col);
      }
    }
  }
  return worst;
}

bool ModelParams::satisfies_hierarchy() const {
  for (const auto& f : features) {
    if (f.interaction_active && (!f.main_active || !cluster_active)) return false;
    if (!f.theta.empty() && !all_zero(f.theta)) {
      if (!f.interaction_active) return false;
      if (all_zero(f.beta) || (!gamma.empty() && all_zero(gamma))) return false;
    }
  }
  return true;
}

ModelParams canonicalize(const ModelParams& params) {
  if (params.has_na()) fail_numerical("cannot reparameterise a model with non-estimable coefficients");
  ModelParams out = params;
  const std::size_t k = out.k;
  for (auto& f : out.features) {
    const std::size_t L = f.levels();
    if (!f.theta.empty()) {
      if (f.variable.is_categorical()) {
        std::vector<double> row(L, 0.0), col(k, 0.0);
        for (std::size_t a = 0; a < L; ++a)
          for (std::size_t s = 0; s < k; ++s) {
            row[a] += f.theta[a * k + s] / static_cast<double>(k);
            col[s] += f.theta[a * k + s] / static_cast<double>(L);
          }
        const double grand = mean(row);
        for (std::size_t a = 0; a < L; ++a)
          for (std::size_t s = 0; s < k; ++s) f.theta[a * k + s] -= row[a] + col[s] - grand;
        for (std::size_t a = 0; a < L; ++a) f.beta[a] += row[a] - grand;
        for (std::size_t s = 0; s < k; ++s) out.gamma[s] += col[s] - grand;
        out.intercept += grand;
      } else {
        const double m = mean(f.theta);
        for (auto& t : f.theta) t -= m;
        f.beta[0] += m;
      }
    }
    if (f.variable.is_categorical()) {
      const double m = mean(f.beta);
      for (auto& b : f.beta) b -= m;
      out.intercept += m;
    }
  }
  if (!out.gamma.empty()) {
    const double m = mean(out.gamma);
    for (auto& g : out.gamma) g -= m;
    out.intercept += m;
  }
  out.coding = Coding::SumToZero;
  return out;
}

ModelParams to_original_units(const ModelParams& params, const StandardizationReport& report) {
  ModelParams out = params;
  for (std::size_t j = 0; j < out.features.size(); ++j) {
    auto& f = out.features[j];
    if (f.variable.is_categorical()) continue;
    const double sd = report.scale_of(j);
    const double c = report.center_of(j);
    f.beta[0] /= sd;
    out.intercept -= f.beta[0] * c;
    for (auto& se : f.beta_se) se /= sd;
    for (std::size_t s = 0; s < f.theta.size(); ++s) {
      f.theta[s] /= sd;
      if (s < f.theta_na.size() && f.theta_na[s] != NaCause::None) continue;
      out.gamma[s] -= f.theta[s] * c;
    }
    for (auto& se : f.theta_se) se /= sd;
    f.scale = sd;
  }
  return out;
}

std::vector<double> sum_to_zero_cells(std::span<const double> contrasts) {
  std::vector<double> cells(contrasts.size() + 1, 0.0);
  for (std::size_t r = 0; r < contrasts.size(); ++r) {
    cells[r + 1] = contrasts[r];
    cells[0] -= contrasts[r];
  }
  return cells;
}

std::vector<double> sum_to_zero_cells(std::span<const double> contrasts, std::size_t levels, std::size_t k) {
  if (contrasts.size() != (levels - 1) * (k - 1)) fail_usage("interaction contrast block has the wrong size");
  std::vector<double> cells(levels * k, 0.0);
  for (std::size_t a = 1; a < levels; ++a)
    for (std::size_t s = 1; s < k; ++s) {
      const double v = contrasts[(a - 1) * (k - 1) + (s - 1)];
      cells[a * k + s] = v;
      cells[a * k] -= v;
    }
  for (std::size_t s = 0; s < k; ++s)
    for (std::size_t a = 1; a < levels; ++a) cells[s] -= cells[a * k + s];
  return cells;
}

nlohmann::json to_json(const ModelParams& params) {
  nlohmann::json feats = nlohmann::json::array();
  for (const auto& f : params.features) {
    nlohmann::json jf = {{"name", f.variable.name},
                         {"kind", f.variable.is_categorical() ? "categorical" : "continuous"},
                         {"levels", f.variable.levels},
                         {"beta", values_json(f.beta, f.beta_na)},
                         {"theta", values_json(f.theta, f.theta_na)},
                         {"main_active", f.main_active},
                         {"interaction_active", f.interaction_active},
                         {"scale", f.scale}};
    if (f.has_na()) {
      jf["beta_na"] = causes_json(f.beta_na);
      jf["theta_na"] = causes_json(f.theta_na);
    }
    if (!f.beta_se.empty()) jf["beta_se"] = values_json(f.beta_se, f.beta_na);
    if (!f.theta_se.empty()) jf["theta_se"] = values_json(f.theta_se, f.theta_na);
    feats.push_back(std::move(jf));
  }
  nlohmann::json j = {{"coding", coding_name(params.coding)},
                      {"k", params.k},
                      {"intercept", params.intercept_na == NaCause::None ? nlohmann::json(params.intercept)
                                                                         : nlohmann::json(nullptr)},
                      {"gamma", values_json(params.gamma, params.gamma_na)},
                      {"cluster_active", params.cluster_active},
                      {"features", feats}};
  if (params.intercept_na != NaCause::None) j["intercept_na"] = to_string(params.intercept_na);
  if (any_na(params.gamma_na)) j["gamma_na"] = causes_json(params.gamma_na);
  if (!params.gamma_se.empty()) j["gamma_se"] = values_json(params.gamma_se, params.gamma_na);
  return j;
}

ModelParams model_params_from_json(const nlohmann::json& j) {
  ModelParams p;
  p.coding = coding_from(j.at("coding").get<std::string>());
  p.k = j.at("k").get<std::size_t>();
  p.intercept = j.at("intercept").is_null() ? kNaN : j.at("intercept").get<double>();
  if (j.contains("intercept_na")) p.intercept_na = na_from(j["intercept_na"].get<std::string>());
  read_values(j.at("gamma"), p.gamma);
  read_causes(j.value("gamma_na", nlohmann::json()), p.gamma.size(), p.gamma_na);
  if (j.contains("gamma_se")) read_values(j["gamma_se"], p.gamma_se);
  p.cluster_active = j.value("cluster_active", true);
  for (const auto& jf : j.at("features")) {
    FeatureParams f;
    f.variable.name = jf.at("name").get<std::string>();
    f.variable.kind = jf.at("kind").get<std::string>() == "categorical" ? VariableKind::Categorical
                                                                        : VariableKind::Continuous;
    f.variable.levels = jf.at("levels").get<std::vector<std::string>>();
    read_values(jf.at("beta"), f.beta);
    read_values(jf.at("theta"), f.theta);
    read_causes(jf.value("beta_na", nlohmann::json()), f.beta.size(), f.beta_na);
    read_causes(jf.value("theta_na", nlohmann::json()), f.theta.size(), f.theta_na);
    if (jf.contains("beta_se")) read_values(jf["beta_se"], f.beta_se);
    if (jf.contains("theta_se")) read_values(jf["theta_se"], f.theta_se);
    f.main_active = jf.value("main_active", true);
    f.interaction_active = jf.value("interaction_active", true);
    f.scale = jf.value("scale", 1.0);
    p.features.push_back(std::move(f));
  }
  return p;
}

}  // namespace dropclust
