#pragma once

#include <optional>
#include <string>

#include "bench/bench.hpp"
#include "embeddings/provider.hpp"
#include "json.hpp"
#include "training/checkpoint.hpp"

namespace clinbench::bench {

/// Where LLM-variant embeddings come from.
struct EmbeddingOptions {
  std::string model_id;
  std::optional<std::string> cache;
  std::optional<std::string> endpoint;

  static EmbeddingOptions from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
  embeddings::ProviderConfig provider_config() const;
};

/// "all" or a positive integer.
std::optional<std::size_t> parse_k(const nlohmann::json& value);
nlohmann::json k_json(const std::optional<std::size_t>& k);

/// Model inputs in cohort order, with embeddings attached for LLM variants.
model::Batch model_inputs(const model::ModelConfig& config, const data::Cohort& cohort, const data::CohortSchema& schema,
                          embeddings::EmbeddingProvider* provider);

/// A grid row from {"name", "kind", "model", "training"}. Training settings
/// start from the architecture's defaults; LLM variants take their embedding
/// width from `embedding_dim` when the model config leaves it out.
BenchModel bench_model_from_json(const nlohmann::json& doc, std::size_t embedding_dim = 0);

/// A fitted model with everything needed to evaluate or save it.
using TrainedModel = training::LoadedCheckpoint;

/// Trains one model from a run description:
///   {"name", "kind": "neural"|"logres", "model", "training", "embeddings",
///    "k": n|"all", "seed", "stratify"}
/// on a k-shot sample of `cohort`. `history` receives the per-epoch record.
TrainedModel train_run(const nlohmann::json& run, const data::CohortSchema& schema, const data::Cohort& cohort,
                       nlohmann::json* history = nullptr);

void save_trained(const TrainedModel& trained, const std::string& dir);

/// `embeddings` overrides the cache/endpoint recorded at training time.
metrics::Predictions predict_trained(const TrainedModel& trained, const data::Cohort& cohort,
                                     const std::optional<EmbeddingOptions>& embeddings = std::nullopt);

/// Report for a single evaluated model, in the few-shot report layout.
BenchResult single_result(const std::string& name, const std::string& k, std::uint64_t seed,
                          const metrics::MetricsReport& report, nlohmann::json meta);

BenchResult evaluate_trained(const TrainedModel& trained, const data::Cohort& cohort,
                             const std::optional<EmbeddingOptions>& embeddings = std::nullopt);

/// Scores from an external CSV (record_id, score[, risk_os, risk_pfs]).
BenchResult evaluate_external(const std::string& name, const std::string& scores_path, const data::Cohort& cohort,
                              const data::CohortSchema& schema);

/// Few-shot grid from
///   {"models": [...], "ks": [...], "seeds": [...], "stratify", "subgroup_pool",
///    "embeddings", "jobs", "timestamps"}.
/// Grid-level "embeddings" apply to LLM rows that do not name their own.
BenchResult fewshot_run(const nlohmann::json& spec, const data::CohortSchema& schema, const data::Cohort& train,
                        const data::Cohort& test, const std::function<void(const CellOutcome&)>& on_cell = {});

}  // namespace clinbench::bench
