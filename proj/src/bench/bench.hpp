#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "data/cohort.hpp"
#include "data/fewshot.hpp"
#include "data/schema.hpp"
#include "json.hpp"
#include "metrics/report.hpp"
#include "model/model.hpp"
#include "training/train.hpp"

namespace clinbench::bench {

enum class ModelKind { Neural, LogRes };

/// One row of the benchmark grid.
struct BenchModel {
  std::string name;
  ModelKind kind = ModelKind::Neural;
  model::ModelConfig model;
  training::TrainConfig train;
  /// Prebuilt inputs in cohort order. Required for the LLM variants (the
  /// embedding lookup happens once, outside the grid); tabular models build
  /// theirs from the cohort when unset.
  std::optional<model::Batch> train_inputs;
  std::optional<model::Batch> test_inputs;

  nlohmann::json to_json() const;
};

metrics::Predictions to_predictions(const model::Prediction& p);

/// Result of one (model, k, seed) cell. A cell that could not run carries
/// `error` and no report.
struct CellOutcome {
  std::string model;
  std::string k;
  std::uint64_t seed = 0;
  std::optional<metrics::MetricsReport> report;
  std::string error;
  std::vector<std::string> warnings;
  /// Baseline fit details (selected l2, validation NLL per grid value).
  nlohmann::json fit;
};

struct BenchResult {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::string> models;
  std::vector<std::string> ks;
  std::vector<std::uint64_t> seeds;
  /// Model-major, then k, then seed.
  std::vector<CellOutcome> cells;

  const CellOutcome& cell(std::size_t model, std::size_t k, std::size_t seed) const;
  /// True when any cell failed or any overall metric is null.
  bool partial() const;
};

struct BenchOptions {
  std::size_t jobs = 1;
  /// Wall-clock start/finish in the metadata. Off by default so identical
  /// runs give byte-identical reports.
  bool timestamps = false;
  std::function<void(const CellOutcome&)> on_cell;
};

/// Trains and evaluates a single cell. Errors from sampling, training or
/// evaluation are recorded in the outcome rather than thrown.
CellOutcome run_cell(const BenchModel& m, const data::Cohort& train, const data::Cohort& test,
                     const data::CohortSchema& schema, const std::optional<std::size_t>& k, std::uint64_t seed,
                     const data::FewShotSpec& spec);

/// Every (model, k, seed) cell on the fixed test cohort, over a pool of
/// `options.jobs` workers. Output order and content do not depend on the pool
/// width.
BenchResult run_fewshot(const std::vector<BenchModel>& models, const data::Cohort& train, const data::Cohort& test,
                        const data::CohortSchema& schema, const data::FewShotSpec& spec,
                        const BenchOptions& options = {});

/// {"meta", "tables": {"auc", "c_os", "c_pfs"}, "curves": {"roc", "km"}}.
/// Curves come from each model's last k at the first seed.
nlohmann::json report_json(const BenchResult& result);
/// Pretty-printed report, written atomically.
void emit_report(const BenchResult& result, const std::string& path);

}  // namespace clinbench::bench
