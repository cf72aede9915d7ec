#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "data/cohort.hpp"
#include "json.hpp"
#include "model/model.hpp"

namespace clinbench::training {

struct TrainConfig {
  double base_lr = 1.25e-4;
  double warmup_lr = 2.5e-7;
  double weight_decay = 0.01;
  double warmup_epochs = 5;
  double total_epochs = 200;
  /// 0: full batch when n <= 2048, else batches of 256.
  std::size_t batch_size = 0;
  std::vector<double> alpha{1.0, 1.0, 1.0};
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  /// Paper defaults: 1.25e-4 for the tabular transformers, 1.25e-5 for the
  /// heads on frozen LLM embeddings.
  static TrainConfig defaults_for(model::Architecture architecture);
  std::size_t epochs() const { return static_cast<std::size_t>(total_epochs); }
  std::size_t resolved_batch(std::size_t n) const;
  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep the values of `base`.
  static TrainConfig from_json(const nlohmann::json& doc, TrainConfig base);
  static TrainConfig from_json(const nlohmann::json& doc);
};

/// Linear warmup from warmup_lr to base_lr over warmup_epochs, then cosine
/// decay to 0 at total_epochs.
double lr_at(double epoch, const TrainConfig& config);

struct AdamState {
  std::vector<model::Tensor> m;
  std::vector<model::Tensor> v;
  std::size_t t = 0;
};

/// One AdamW update with decoupled weight decay:
/// p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p).
/// A non-finite gradient is a numeric error naming the tensor.
void adamw_step(std::vector<model::NamedTensor>& params, const std::vector<model::Tensor>& grads, AdamState& state,
                double lr, const TrainConfig& config);

/// Training targets in cohort order.
struct Targets {
  std::vector<int> bor;
  std::vector<double> os_time;
  std::vector<int> os_event;
  std::vector<double> pfs_time;
  std::vector<int> pfs_event;

  std::size_t size() const noexcept { return bor.size(); }
  Targets rows(std::span<const std::size_t> idx) const;
};

Targets make_targets(const data::Cohort& cohort);

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  /// Mean over the epoch's steps; NaN when the task was not trained.
  double loss_bor = 0.0;
  double loss_os = 0.0;
  double loss_pfs = 0.0;
  double loss_total = 0.0;
};

struct History {
  std::vector<EpochRecord> epochs;
  std::vector<std::string> warnings;
  /// Loss weights actually used (tasks without events are zeroed).
  std::vector<double> alpha;

  nlohmann::json to_json() const;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Multi-task training: per step forward, omnivorous loss, backward, AdamW at
/// lr_at(epoch). Deterministic given config.seed. A non-finite loss restores
/// the parameters from before that epoch and raises a divergence error.
History train(model::Model& model, const model::Batch& inputs, const Targets& targets, const TrainConfig& config,
              const EpochCallback& on_epoch = {});

}  // namespace clinbench::training
