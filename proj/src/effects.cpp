#include "dropclust/effects.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "dropclust/design.hpp"
#include "dropclust/error.hpp"

namespace dropclust {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_na(const std::vector<NaCause>& na, std::size_t i) { return i < na.size() && na[i] != NaCause::None; }

std::size_t cluster_index(const ModelParams& p, int label) {
  if (p.k < 2) return 0;
  if (label < 1 || static_cast<std::size_t>(label) > p.k) fail_usage("cluster label outside 1..k");
  return static_cast<std::size_t>(label - 1);
}

// Contrast-code evaluation of a sum-to-zero model.
double contrast_log_or(const ModelParams& p, const FeatureParams& f, std::size_t level, int label) {
  const std::size_t k = p.k;
  const bool interact = !f.theta.empty() && k >= 2;
  const std::size_t kk = interact ? k : 1;
  ContrastRow hi, lo;
  if (f.variable.is_categorical()) {
    hi = fcode_row(f.variable, level, label, kk);
    lo = fcode_row(f.variable, std::size_t{0}, label, kk);
  } else {
    hi = fcode_row_continuous(1.0, label, kk);
    lo = fcode_row_continuous(0.0, label, kk);
  }
  const std::size_t L = f.levels();
  double out = 0.0;
  if (f.variable.is_categorical()) {
    for (std::size_t r = 0; r + 1 < L; ++r) out += (hi.main[r] - lo.main[r]) * f.beta[r + 1];
  } else {
    out += (hi.main[0] - lo.main[0]) * f.beta[0];
  }
  if (!interact) return out;
  // Contrast coefficient of (level r, cluster t), r, t >= 1.
  const std::size_t first = f.variable.is_categorical() ? 1 : 0;
  const std::size_t rows = f.variable.is_categorical() ? L - 1 : 1;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t t = 0; t + 1 < k; ++t) {
      const std::size_t at = r * (k - 1) + t;
      out += (hi.interaction[at] - lo.interaction[at]) * f.theta[(r + first) * k + t + 1];
    }
  return out;
}

// Cell evaluation, valid for any one-hot parameterisation.
double cell_log_or(const ModelParams& p, const FeatureParams& f, std::size_t level, std::size_t s) {
  const std::size_t k = p.k;
  const bool interact = !f.theta.empty();
  if (f.variable.is_categorical()) {
    if (is_na(f.beta_na, level) || is_na(f.beta_na, 0)) return kNaN;
    double out = f.beta[level] - f.beta[0];
    if (interact) {
      if (is_na(f.theta_na, level * k + s) || is_na(f.theta_na, s)) return kNaN;
      out += f.theta[level * k + s] - f.theta[s];
    }
    return out;
  }
  if (is_na(f.beta_na, 0)) return kNaN;
  double out = f.beta[0];
  if (interact) {
    if (is_na(f.theta_na, s)) return kNaN;
    out += f.theta[s];
  }
  return out;
}

NaCause cause_of(const FeatureParams& f, std::size_t level, std::size_t s, std::size_t k) {
  const std::size_t cells[] = {level, 0};
  for (std::size_t c : cells)
    if (is_na(f.beta_na, c)) return f.beta_na[c];
  if (!f.theta.empty()) {
    const std::size_t tc[] = {level * k + s, s};
    for (std::size_t c : tc)
      if (is_na(f.theta_na, c)) return f.theta_na[c];
  }
  return NaCause::None;
}

}  // namespace

double EffectEstimate::odds_ratio(std::size_t s) const { return std::exp(log_or[s]); }
double EffectEstimate::ror(std::size_t s) const { return std::exp(log_ror[s]); }

double conditional_log_or(const ModelParams& params, std::size_t feature, std::size_t level, int cluster_label) {
  if (feature >= params.features.size()) fail_usage("feature index out of range");
  const auto& f = params.features[feature];
  if (f.variable.is_categorical() && level >= f.levels())
    fail_usage("unknown level index for '" + f.variable.name + "'");
  const std::size_t s = cluster_index(params, cluster_label);
  if (f.variable.is_categorical() && level == 0) return 0.0;
  if (params.coding == Coding::SumToZero && !f.has_na())
    return contrast_log_or(params, f, level, params.k >= 2 ? cluster_label : 1);
  return cell_log_or(params, f, level, s);
}

std::string formula_tag(const ModelParams& params, std::size_t feature) {
  const auto& f = params.features[feature];
  bool interacts = false;
  for (double t : f.theta) interacts = interacts || t != 0.0;
  std::string kind;
  if (!f.variable.is_categorical()) kind = "continuous";
  else if (f.levels() == 2) kind = "binary";
  else kind = std::to_string(f.levels()) + "-level";
  std::string scope;
  if (!interacts || params.k < 2) scope = "no-interaction";
  else if (params.k <= 3) scope = "k=" + std::to_string(params.k);
  else scope = "k>3";
  return scope + ":" + kind;
}

std::vector<EffectEstimate> effect_table(const ModelParams& params, bool standardized_units) {
  std::vector<EffectEstimate> out;
  const std::size_t kc = std::max<std::size_t>(params.k, 1);
  for (std::size_t j = 0; j < params.features.size(); ++j) {
    const auto& f = params.features[j];
    const std::size_t first = f.variable.is_categorical() ? 1 : 0;
    const std::size_t last = f.variable.is_categorical() ? f.levels() : 1;
    for (std::size_t a = first; a < last; ++a) {
      EffectEstimate e;
      e.variable = f.variable.name;
      e.feature = j;
      e.continuous = !f.variable.is_categorical();
      e.level = e.continuous ? "unit increase" : f.variable.levels[a];
      e.level_index = a;
      e.formula_tag = formula_tag(params, j);
      for (std::size_t s = 0; s < kc; ++s) {
        double v = conditional_log_or(params, j, a, static_cast<int>(s + 1));
        if (e.continuous && standardized_units) v *= f.scale;
        e.log_or.push_back(v);
        e.na.push_back(std::isnan(v) ? cause_of(f, a, s, params.k) : NaCause::None);
      }
      for (std::size_t s = 0; s < kc; ++s) e.log_ror.push_back(e.log_or[s] - e.log_or[0]);
      out.push_back(std::move(e));
    }
  }
  return out;
}

double ror_from_ors(double or_a, double or_b) {
  if (std::isnan(or_a) || std::isnan(or_b)) fail_numerical("ratio of odds ratios needs two estimable odds ratios");
  if (!(or_a > 0.0) || or_b < 0.0) fail_usage("odds ratios must be positive");
  return or_b / or_a;
}

std::string interpret_ror(double ror) {
  if (std::isnan(ror)) return "not estimable";
  const long pct = std::lround(100.0 * (ror - 1.0));
  if (pct == 0) return "no differential effect";
  if (pct > 0) return "approximately " + std::to_string(pct) + "% stronger";
  return "approximately " + std::to_string(-pct) + "% weaker";
}

std::string interpret(const EffectEstimate& e, std::size_t s) {
  const std::string what = e.continuous ? e.variable + " (per unit increase)" : e.variable + "=" + e.level;
  const double r = e.ror(s);
  const std::string reading = interpret_ror(r);
  if (reading == "no differential effect" || reading == "not estimable")
    return "The association between " + what + " and the outcome shows " + reading + " within C" +
           std::to_string(s + 1) + " relative to C1.";
  return "The association between " + what + " and the outcome is " + reading + " within C" + std::to_string(s + 1) +
         " than within C1.";
}

nlohmann::json to_json(const std::vector<EffectEstimate>& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : table) {
    nlohmann::json ors = nlohmann::json::array(), rors = nlohmann::json::array(), na = nlohmann::json::array();
    for (std::size_t s = 0; s < e.clusters(); ++s) {
      ors.push_back(std::isnan(e.log_or[s]) ? nlohmann::json(nullptr) : nlohmann::json(e.odds_ratio(s)));
      rors.push_back(std::isnan(e.log_ror[s]) ? nlohmann::json(nullptr) : nlohmann::json(e.ror(s)));
      na.push_back(e.na[s] == NaCause::None ? nlohmann::json(nullptr) : nlohmann::json(to_string(e.na[s])));
    }
    rows.push_back({{"variable", e.variable},
                    {"level", e.level},
                    {"formula", e.formula_tag},
                    {"or", ors},
                    {"ror", rors},
                    {"na", na}});
  }
  return rows;
}

void write_effects_csv(std::ostream& out, const std::vector<EffectEstimate>& table) {
  const std::size_t k = table.empty() ? 1 : table.front().clusters();
  out << "variable,level,formula";
  for (std::size_t s = 0; s < k; ++s) out << ",or_c" << s + 1;
  for (std::size_t s = 1; s < k; ++s) out << ",ror_c" << s + 1;
  out << ",na\n";
  auto num = [&](double v) {
    std::ostringstream os;
    if (std::isnan(v)) os << "NA";
    else os << std::setprecision(10) << v;
    return os.str();
  };
  for (const auto& e : table) {
    out << e.variable << ',' << e.level << ',' << e.formula_tag;
    for (std::size_t s = 0; s < k; ++s) out << ',' << num(std::isnan(e.log_or[s]) ? e.log_or[s] : e.odds_ratio(s));
    for (std::size_t s = 1; s < k; ++s) out << ',' << num(std::isnan(e.log_ror[s]) ? e.log_ror[s] : e.ror(s));
    std::string causes;
    for (std::size_t s = 0; s < k; ++s)
      if (e.na[s] != NaCause::None) causes += (causes.empty() ? "" : ";") + std::string("C") + std::to_string(s + 1) +
                                              ":" + to_string(e.na[s]);
    out << ',' << causes << '\n';
  }
}

}  // namespace dropclust
