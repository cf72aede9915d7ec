#pragma once

#include <atomic>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace clinbench::embeddings {

/// Environment variable that overrides any configured service endpoint.
inline constexpr const char* kEndpointEnv = "CLINBENCH_EMBED_ENDPOINT";

/// The override from the environment when set and non-empty, else `configured`.
std::optional<std::string> resolve_endpoint(std::optional<std::string> configured);

struct ClientOptions {
  double timeout_seconds = 60.0;
  /// Texts per POST /embed request.
  std::size_t max_batch = 64;
  /// Requests issued concurrently.
  std::size_t max_in_flight = 4;
};

struct HealthStatus {
  std::string status;
  std::string model;
  std::size_t dim = 0;
};

struct EmbedResult {
  std::string model;
  std::size_t dim = 0;
  std::vector<std::vector<float>> vectors;
};

/// Client for the embedding service: POST /embed and GET /health, JSON
/// bodies. `endpoint` is a base URL such as http://127.0.0.1:8000.
class EmbedClient {
 public:
  explicit EmbedClient(std::string endpoint, ClientOptions options = {});

  const std::string& endpoint() const noexcept { return endpoint_; }
  HealthStatus health() const;
  /// Pooled embeddings, one per text, in request order. Large inputs are
  /// split into batches; a 413 reply halves the batch and retries.
  EmbedResult embed(const std::string& model, const std::vector<std::string>& texts) const;
  /// Number of HTTP requests sent so far.
  std::size_t requests() const noexcept { return requests_->load(); }

 private:
  EmbedResult post_batch(const std::string& model, const std::vector<std::string>& texts) const;

  std::string endpoint_;
  ClientOptions options_;
  std::shared_ptr<std::atomic<std::size_t>> requests_;
};

}  // namespace clinbench::embeddings
