#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "data/csv.hpp"
#include "data/schema.hpp"
#include "json.hpp"

namespace clinbench::data {

/// Generator for cohorts with a known latent score
///   s = sum_j w_j x_j + sum_c effect_c[category_c]
/// BOR ~ Bernoulli(sigmoid(s)); event time ~ Exponential(baseline_hazard * exp(hazard_coef * s));
/// censor time ~ Exponential(censor_rate) (no censoring at rate 0).
struct SyntheticConfig {
  std::size_t n = 1000;
  std::vector<std::size_t> cat_cardinalities{4, 3, 3, 2};
  std::size_t n_continuous = 4;
  /// Continuous coefficients; drawn N(0, signal_scale^2) when empty.
  std::vector<double> weights;
  /// Per-category effects; drawn N(0, signal_scale^2) when empty.
  std::vector<std::vector<double>> cat_effects;
  double signal_scale = 1.0;
  double baseline_hazard = 0.05;
  /// Hazard of progression; PFS time is min(progression, death).
  double pfs_baseline_hazard = 0.1;
  /// Negative: responders (high s) also survive longer.
  double hazard_coef = -1.0;
  double censor_rate = 0.02;
  /// Fraction of feature cells blanked after the latent score is computed.
  double missing_rate = 0.0;
  /// Categorical feature that doubles as the subgroup tag ("cancer_type").
  std::optional<std::size_t> subgroup_feature = 0;
  std::uint64_t seed = 0;

  void validate() const;
  static SyntheticConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

struct SyntheticCohort {
  RawTable table;
  SchemaConfig schema;
  /// Latent score per row, in table order.
  std::vector<double> latent;
  std::vector<double> weights;
  std::vector<std::vector<double>> cat_effects;
};

SyntheticCohort gen_synthetic(const SyntheticConfig& config);

}  // namespace clinbench::data
