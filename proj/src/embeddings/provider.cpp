#include "embeddings/provider.hpp"

#include <filesystem>
#include <set>

#include "common/error.hpp"
#include "embeddings/serialize.hpp"

namespace clinbench::embeddings {

EmbeddingProvider::EmbeddingProvider(ProviderConfig config) : config_(std::move(config)), model_id_(config_.model_id) {
  config_.endpoint = resolve_endpoint(config_.endpoint);
  if (config_.cache_path && std::filesystem::exists(*config_.cache_path)) {
    cache_ = EmbeddingCache::load(*config_.cache_path);
    if (model_id_.empty()) model_id_ = cache_->model_id();
    require(cache_->model_id() == model_id_, ErrorKind::Integrity,
            *config_.cache_path + " holds embeddings of '" + cache_->model_id() + "', requested '" + model_id_ + "'");
  }
  require(!model_id_.empty(), ErrorKind::Validation, "no embedding model id given and no cache to take it from");
  if (config_.endpoint) client_.emplace(*config_.endpoint, config_.client);
}

std::size_t EmbeddingProvider::dim() {
  std::lock_guard lock(mu_);
  if (cache_) return cache_->dim();
  require(client_.has_value(), ErrorKind::Unavailable, "embedding dim unknown: no cache file and no service endpoint");
  const HealthStatus h = client_->health();
  require(h.model == model_id_, ErrorKind::Integrity, "service serves '" + h.model + "', requested '" + model_id_ + "'");
  return h.dim;
}

std::size_t EmbeddingProvider::service_calls() const {
  std::lock_guard lock(mu_);
  return client_ ? client_->requests() : 0;
}

std::size_t EmbeddingProvider::cached() const {
  std::lock_guard lock(mu_);
  return cache_ ? cache_->size() : 0;
}

std::vector<std::vector<float>> EmbeddingProvider::get(const std::vector<std::string>& texts) {
  std::lock_guard lock(mu_);
  std::vector<std::string> missing;
  std::set<std::string> seen;
  for (const std::string& t : texts)
    if ((!cache_ || !cache_->find(t)) && seen.insert(t).second) missing.push_back(t);

  if (!missing.empty()) {
    if (!client_) {
      std::string list;
      for (std::size_t i = 0; i < missing.size() && i < 10; ++i)
        list += (i ? ", " : "") + content_hash(model_id_, missing[i]);
      if (missing.size() > 10) list += ", ... (" + std::to_string(missing.size()) + " in total)";
      fail(ErrorKind::Unavailable, std::to_string(missing.size()) + " texts are not cached and no embedding endpoint is set; missing " + list);
    }
    EmbedResult res = client_->embed(model_id_, missing);
    if (cache_) {
      require(res.dim == cache_->dim(), ErrorKind::Integrity,
              "service dim " + std::to_string(res.dim) + " differs from cached dim " + std::to_string(cache_->dim()));
    } else {
      cache_.emplace(model_id_, res.dim);
    }
    for (std::size_t i = 0; i < missing.size(); ++i) cache_->insert(missing[i], std::move(res.vectors[i]));
    if (config_.cache_path) cache_->append(*config_.cache_path, missing);
  }

  std::vector<std::vector<float>> out;
  out.reserve(texts.size());
  for (const std::string& t : texts) out.push_back(cache_->find(t)->vector);
  return out;
}

EmbeddingMode mode_for(model::Architecture architecture) {
  return architecture == model::Architecture::LlmLinear ? EmbeddingMode::Pooled : EmbeddingMode::PerSentence;
}

void attach_embeddings(model::Batch& batch, const data::Cohort& cohort, const data::CohortSchema& schema,
                       EmbeddingProvider& provider, EmbeddingMode mode) {
  require(batch.size == cohort.size(), ErrorKind::Contract, "batch and cohort sizes differ");
  std::vector<std::string> texts;
  for (const auto& r : cohort.records()) {
    SerializedRecord s = serialize(r, schema);
    if (mode == EmbeddingMode::Pooled) {
      texts.push_back(std::move(s.joined));
    } else {
      for (auto& sentence : s.sentences) texts.push_back(std::move(sentence));
    }
  }
  const auto vectors = provider.get(texts);
  batch.embedding_tokens = mode == EmbeddingMode::Pooled ? 1 : schema.feature_count();
  batch.embedding_dim = vectors.empty() ? 0 : vectors.front().size();
  batch.embeddings.clear();
  batch.embeddings.reserve(vectors.size() * batch.embedding_dim);
  // Upcast to double at model input.
  for (const auto& v : vectors) batch.embeddings.insert(batch.embeddings.end(), v.begin(), v.end());
}

}  // namespace clinbench::embeddings
