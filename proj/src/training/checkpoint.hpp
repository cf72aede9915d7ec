#pragma once

#include <optional>
#include <string>

#include "baselines/logres.hpp"
#include "data/schema.hpp"
#include "json.hpp"
#include "model/model.hpp"
#include "training/train.hpp"

namespace clinbench::training {

/// On-disk layout of a checkpoint directory.
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kTensorsFile = "tensors.bin";
inline constexpr const char* kSchemaFile = "fitted_schema.json";

struct CheckpointInfo {
  std::size_t epoch = 0;
  nlohmann::json metrics = nlohmann::json::object();
  /// Free-form run details (embedding model id, data paths).
  nlohmann::json extra = nlohmann::json::object();
};

/// Writes manifest.json, tensors.bin (little-endian float32) and
/// fitted_schema.json into `dir`, creating it if needed.
void save_checkpoint(const std::string& dir, const model::Model& model, const data::CohortSchema& schema,
                     const TrainConfig& train, const CheckpointInfo& info);
/// Logistic-regression checkpoints keep their weights in the manifest as
/// exact doubles; tensors.bin is empty.
void save_checkpoint(const std::string& dir, const baselines::LogResModel& model, const data::CohortSchema& schema,
                     const CheckpointInfo& info);

struct LoadedCheckpoint {
  std::string kind;  ///< "neural" or "logres"
  data::CohortSchema schema;
  std::optional<model::Model> model;
  std::optional<baselines::LogResModel> logres;
  TrainConfig train;
  CheckpointInfo info;
  nlohmann::json manifest;
};

/// Rebuilds the model from the stored config and restores tensors by name.
/// Missing, extra or mis-shaped tensors and a schema hash mismatch are
/// integrity errors.
LoadedCheckpoint load_checkpoint(const std::string& dir);

}  // namespace clinbench::training
