#pragma once

#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "data/cohort.hpp"
#include "data/schema.hpp"
#include "embeddings/cache.hpp"
#include "embeddings/client.hpp"
#include "model/model.hpp"

namespace clinbench::embeddings {

enum class EmbeddingMode { Pooled, PerSentence };

struct ProviderConfig {
  /// Empty: adopt the model id recorded in the cache file.
  std::string model_id;
  std::optional<std::string> cache_path;
  std::optional<std::string> endpoint;
  ClientOptions client;
};

/// Cache-first embedding lookup. Misses go to the service (when an endpoint
/// is configured) and are appended to the cache file.
class EmbeddingProvider {
 public:
  explicit EmbeddingProvider(ProviderConfig config);

  const std::string& model_id() const noexcept { return model_id_; }
  /// Vector width; asks the service's /health when the cache is still empty.
  std::size_t dim();
  std::vector<std::vector<float>> get(const std::vector<std::string>& texts);
  /// HTTP requests made so far.
  std::size_t service_calls() const;
  std::size_t cached() const;

 private:
  ProviderConfig config_;
  std::string model_id_;
  std::optional<EmbeddingCache> cache_;
  std::optional<EmbedClient> client_;
  mutable std::mutex mu_;
};

/// Fills the embedding fields of `batch` for the cohort's records: one joined
/// text per record (pooled) or one text per feature sentence.
void attach_embeddings(model::Batch& batch, const data::Cohort& cohort, const data::CohortSchema& schema,
                       EmbeddingProvider& provider, EmbeddingMode mode);

EmbeddingMode mode_for(model::Architecture architecture);

}  // namespace clinbench::embeddings
