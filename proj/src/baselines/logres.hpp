#pragma once

#include <cstdint>
#include <vector>

#include "data/cohort.hpp"
#include "data/schema.hpp"
#include "json.hpp"
#include "metrics/report.hpp"

namespace clinbench::baselines {

/// Expanded design matrix: one-hot categoricals (every vocabulary id,
/// reserved ones included) followed by the normalized continuous values.
struct Design {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> x;  // row-major
  std::vector<int> y;
};

Design make_design(const data::Cohort& cohort, const data::CohortSchema& schema);

struct LogResConfig {
  double l2 = 0.01;
  std::size_t epochs = 500;
  double lr = 0.5;
};

struct LogResModel {
  std::vector<double> weights;
  double bias = 0.0;
  double l2 = 0.0;

  nlohmann::json to_json() const;
  static LogResModel from_json(const nlohmann::json& doc);
};

/// Mean negative log-likelihood plus (l2/2)||w||^2; the bias is not penalized.
double lr_objective(const LogResModel& m, const Design& d);

/// Full-batch proximal gradient descent from zero: a gradient step on the
/// mean NLL, then the closed-form shrink w /= (1 + lr * l2). `trace`, when
/// given, receives the objective before every step and after the last.
LogResModel lr_fit(const Design& d, const LogResConfig& config, std::vector<double>* trace = nullptr);
LogResModel lr_fit(const data::Cohort& cohort, const data::CohortSchema& schema, const LogResConfig& config);

std::vector<double> lr_predict(const LogResModel& m, const Design& d);

/// Grid search over l2 by stratified k-fold validation NLL, then a refit on
/// the whole cohort.
struct GridResult {
  LogResModel model;
  std::vector<double> grid;
  std::vector<double> validation_nll;  // NaN where no fold could be scored
};

inline const std::vector<double> kDefaultL2Grid{0.001, 0.01, 0.1, 1.0};

GridResult lr_fit_grid(const data::Cohort& cohort, const data::CohortSchema& schema, std::uint64_t seed,
                       const std::vector<double>& grid = kDefaultL2Grid, LogResConfig base = {});

/// Responder probabilities, with 1 - p as both survival risk scores.
metrics::Predictions lr_predictions(const LogResModel& m, const data::Cohort& cohort, const data::CohortSchema& schema);

}  // namespace clinbench::baselines
