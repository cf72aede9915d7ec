#include "data/synthetic.hpp"

#include <cstdio>
#include <cmath>
#include <limits>

#include "common/error.hpp"
#include "numerics/rng.hpp"

namespace clinbench::data {

using nlohmann::json;

void SyntheticConfig::validate() const {
  require(n >= 1, ErrorKind::Validation, "synthetic n must be positive");
  require(!cat_cardinalities.empty() || n_continuous > 0, ErrorKind::Validation, "synthetic cohort needs features");
  for (std::size_t c : cat_cardinalities) require(c >= 1, ErrorKind::Validation, "category cardinality must be >= 1");
  require(weights.empty() || weights.size() == n_continuous, ErrorKind::Validation,
          "weights length must equal n_continuous");
  require(cat_effects.empty() || cat_effects.size() == cat_cardinalities.size(), ErrorKind::Validation,
          "cat_effects needs one list per categorical feature");
  for (std::size_t j = 0; j < cat_effects.size(); ++j)
    require(cat_effects[j].size() == cat_cardinalities[j], ErrorKind::Validation,
            "cat_effects[" + std::to_string(j) + "] length must equal its cardinality");
  require(baseline_hazard > 0.0 && pfs_baseline_hazard > 0.0, ErrorKind::Validation, "baseline hazards must be > 0");
  require(censor_rate >= 0.0, ErrorKind::Validation, "censor_rate must be >= 0");
  require(missing_rate >= 0.0 && missing_rate < 1.0, ErrorKind::Validation, "missing_rate must be in [0, 1)");
  require(!subgroup_feature || *subgroup_feature < cat_cardinalities.size(), ErrorKind::Validation,
          "subgroup_feature must index a categorical feature");
}

SyntheticConfig SyntheticConfig::from_json(const json& doc) {
  SyntheticConfig c;
  c.n = doc.value("n", c.n);
  c.cat_cardinalities = doc.value("cat_cardinalities", c.cat_cardinalities);
  c.n_continuous = doc.value("n_continuous", c.n_continuous);
  c.weights = doc.value("weights", c.weights);
  c.cat_effects = doc.value("cat_effects", c.cat_effects);
  c.signal_scale = doc.value("signal_scale", c.signal_scale);
  c.baseline_hazard = doc.value("baseline_hazard", c.baseline_hazard);
  c.pfs_baseline_hazard = doc.value("pfs_baseline_hazard", c.pfs_baseline_hazard);
  c.hazard_coef = doc.value("hazard_coef", c.hazard_coef);
  c.censor_rate = doc.value("censor_rate", c.censor_rate);
  c.missing_rate = doc.value("missing_rate", c.missing_rate);
  if (doc.contains("subgroup_feature")) {
    c.subgroup_feature = doc.at("subgroup_feature").is_null()
                             ? std::nullopt
                             : std::optional<std::size_t>(doc.at("subgroup_feature").get<std::size_t>());
  }
  c.seed = doc.value("seed", c.seed);
  c.validate();
  return c;
}

json SyntheticConfig::to_json() const {
  return {{"n", n},
          {"cat_cardinalities", cat_cardinalities},
          {"n_continuous", n_continuous},
          {"weights", weights},
          {"cat_effects", cat_effects},
          {"signal_scale", signal_scale},
          {"baseline_hazard", baseline_hazard},
          {"pfs_baseline_hazard", pfs_baseline_hazard},
          {"hazard_coef", hazard_coef},
          {"censor_rate", censor_rate},
          {"missing_rate", missing_rate},
          {"subgroup_feature", subgroup_feature ? json(*subgroup_feature) : json(nullptr)},
          {"seed", seed}};
}

namespace {

double round4(double x) { return std::round(x * 1e4) / 1e4; }

std::string category_label(bool subgroup, std::size_t level) {
  if (subgroup) return "type_" + std::string(1, static_cast<char>('a' + level % 26)) + (level >= 26 ? std::to_string(level / 26) : "");
  return "c" + std::to_string(level);
}

}  // namespace

SyntheticCohort gen_synthetic(const SyntheticConfig& config) {
  config.validate();
  const numerics::CounterRng root(config.seed);
  SyntheticCohort out;

  // Coefficients come from their own stream so that n does not change them.
  numerics::CounterRng coef_rng = root.fork(1);
  out.weights = config.weights;
  if (out.weights.empty())
    for (std::size_t j = 0; j < config.n_continuous; ++j) out.weights.push_back(config.signal_scale * coef_rng.normal());
  out.cat_effects = config.cat_effects;
  if (out.cat_effects.empty()) {
    for (std::size_t card : config.cat_cardinalities) {
      std::vector<double> eff;
      for (std::size_t l = 0; l < card; ++l) eff.push_back(config.signal_scale * coef_rng.normal());
      out.cat_effects.push_back(std::move(eff));
    }
  }

  SchemaConfig& schema = out.schema;
  std::vector<std::string> cat_names;
  for (std::size_t j = 0; j < config.cat_cardinalities.size(); ++j) {
    const bool is_sub = config.subgroup_feature && *config.subgroup_feature == j;
    cat_names.push_back(is_sub ? "cancer_type" : "cat_" + std::to_string(j + 1));
    schema.features.push_back({cat_names.back(), FeatureKind::Categorical});
  }
  for (std::size_t j = 0; j < config.n_continuous; ++j)
    schema.features.push_back({"lab_" + std::to_string(j + 1), FeatureKind::Continuous});
  schema.endpoints = {"bor", "os_months", "os_event", "pfs_months", "pfs_event"};
  if (config.subgroup_feature) schema.subgroup = "cancer_type";
  schema.id_column = "patient_id";

  RawTable& t = out.table;
  t.header.push_back("patient_id");
  for (const auto& f : schema.features) t.header.push_back(f.name);
  t.header.insert(t.header.end(), {"bor", "os_months", "os_event", "pfs_months", "pfs_event", "true_score"});

  const std::size_t m_cat = config.cat_cardinalities.size();
  for (std::size_t i = 0; i < config.n; ++i) {
    numerics::CounterRng rng = root.fork(1000 + i);
    std::vector<std::string> row;
    char id[32];
    std::snprintf(id, sizeof id, "P%06zu", i + 1);
    row.emplace_back(id);
    double s = 0.0;
    for (std::size_t j = 0; j < m_cat; ++j) {
      const std::size_t level = static_cast<std::size_t>(rng.below(config.cat_cardinalities[j]));
      s += out.cat_effects[j][level];
      const bool is_sub = config.subgroup_feature && *config.subgroup_feature == j;
      row.push_back(category_label(is_sub, level));
    }
    for (std::size_t j = 0; j < config.n_continuous; ++j) {
      const double x = round4(rng.normal());
      s += out.weights[j] * x;
      row.push_back(format_number(x));
    }
    const double p = 1.0 / (1.0 + std::exp(-s));
    const int bor = rng.bernoulli(p) ? 1 : 0;
    const double risk = std::exp(config.hazard_coef * s);
    const double death = rng.exponential(config.baseline_hazard * risk);
    const double progression = rng.exponential(config.pfs_baseline_hazard * risk);
    const double censor =
        config.censor_rate > 0.0 ? rng.exponential(config.censor_rate) : std::numeric_limits<double>::infinity();
    const double pfs_event_time = std::min(death, progression);
    const double os_obs = round4(std::min(death, censor));
    const double pfs_obs = round4(std::min(pfs_event_time, censor));
    const int os_event = death <= censor ? 1 : 0;
    const int pfs_event = pfs_event_time <= censor ? 1 : 0;

    for (std::size_t f = 0; f < schema.features.size() && config.missing_rate > 0.0; ++f) {
      const bool is_sub = config.subgroup_feature && f == *config.subgroup_feature;
      if (!is_sub && rng.bernoulli(config.missing_rate)) row[1 + f].clear();
    }
    row.push_back(std::to_string(bor));
    row.push_back(format_number(os_obs));
    row.push_back(std::to_string(os_event));
    row.push_back(format_number(pfs_obs));
    row.push_back(std::to_string(pfs_event));
    row.push_back(format_number(s));
    out.latent.push_back(s);
    t.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace clinbench::data
