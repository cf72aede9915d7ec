#include "embeddings/client.hpp"

#include <cstdlib>
#include <future>

#include "common/error.hpp"
#include "httplib.h"
#include "json.hpp"

namespace clinbench::embeddings {

using nlohmann::json;

std::optional<std::string> resolve_endpoint(std::optional<std::string> configured) {
  if (const char* env = std::getenv(kEndpointEnv); env && *env) return std::string(env);
  return configured;
}

EmbedClient::EmbedClient(std::string endpoint, ClientOptions options)
    : endpoint_(std::move(endpoint)), options_(options), requests_(std::make_shared<std::atomic<std::size_t>>(0)) {
  while (!endpoint_.empty() && endpoint_.back() == '/') endpoint_.pop_back();
  require(!endpoint_.empty(), ErrorKind::Validation, "empty embedding endpoint");
  require(options_.max_batch > 0 && options_.max_in_flight > 0 && options_.timeout_seconds > 0, ErrorKind::Validation,
          "embedding client options must be positive");
}

namespace {

httplib::Client make_client(const std::string& endpoint, double timeout) {
  httplib::Client cli(endpoint);
  const auto secs = static_cast<time_t>(timeout);
  const auto usecs = static_cast<time_t>((timeout - static_cast<double>(secs)) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  return cli;
}

[[noreturn]] void transport_failure(const std::string& endpoint, httplib::Error err) {
  fail(ErrorKind::Unavailable, "embedding service at " + endpoint + " unreachable: " + httplib::to_string(err));
}

json parse_body(const std::string& body, const std::string& what) {
  try {
    return json::parse(body);
  } catch (const json::exception& e) {
    fail(ErrorKind::Integrity, what + ": malformed JSON reply: " + e.what());
  }
}

}  // namespace

HealthStatus EmbedClient::health() const {
  auto cli = make_client(endpoint_, options_.timeout_seconds);
  ++*requests_;
  auto res = cli.Get("/health");
  if (!res) transport_failure(endpoint_, res.error());
  require(res->status != 503, ErrorKind::Unavailable, "embedding service is still loading its model");
  require(res->status == 200, ErrorKind::Unavailable, "GET /health returned HTTP " + std::to_string(res->status));
  const json j = parse_body(res->body, "GET /health");
  HealthStatus h;
  try {
    h.status = j.at("status").get<std::string>();
    h.model = j.at("model").get<std::string>();
    h.dim = j.at("dim").get<std::size_t>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Integrity, std::string("GET /health: ") + e.what());
  }
  return h;
}

EmbedResult EmbedClient::post_batch(const std::string& model, const std::vector<std::string>& texts) const {
  auto cli = make_client(endpoint_, options_.timeout_seconds);
  const json req{{"model", model}, {"texts", texts}, {"mode", "pooled"}};
  ++*requests_;
  auto res = cli.Post("/embed", req.dump(), "application/json");
  if (!res) transport_failure(endpoint_, res.error());
  if (res->status == 413 && texts.size() > 1) {
    const auto mid = texts.begin() + static_cast<std::ptrdiff_t>(texts.size() / 2);
    EmbedResult a = post_batch(model, {texts.begin(), mid});
    EmbedResult b = post_batch(model, {mid, texts.end()});
    require(a.dim == b.dim, ErrorKind::Integrity, "embedding service changed dim between requests");
    for (auto& v : b.vectors) a.vectors.push_back(std::move(v));
    return a;
  }
  require(res->status != 503, ErrorKind::Unavailable, "embedding service is still loading its model");
  require(res->status != 400, ErrorKind::Validation, "POST /embed rejected the request: " + res->body);
  require(res->status == 200, ErrorKind::Unavailable, "POST /embed returned HTTP " + std::to_string(res->status));

  const json j = parse_body(res->body, "POST /embed");
  EmbedResult out;
  try {
    out.model = j.at("model").get<std::string>();
    out.dim = j.at("dim").get<std::size_t>();
    for (const json& v : j.at("vectors")) {
      std::vector<float> vec;
      vec.reserve(v.size());
      for (const json& x : v) vec.push_back(static_cast<float>(x.get<double>()));
      out.vectors.push_back(std::move(vec));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Integrity, std::string("POST /embed: ") + e.what());
  }
  require(out.model == model, ErrorKind::Integrity, "service answered for model '" + out.model + "', asked '" + model + "'");
  require(out.vectors.size() == texts.size(), ErrorKind::Integrity,
          "service returned " + std::to_string(out.vectors.size()) + " vectors for " + std::to_string(texts.size()) +
              " texts");
  for (const auto& v : out.vectors)
    require(v.size() == out.dim, ErrorKind::Integrity, "service vector length disagrees with its reported dim");
  return out;
}

EmbedResult EmbedClient::embed(const std::string& model, const std::vector<std::string>& texts) const {
  EmbedResult out;
  out.model = model;
  if (texts.empty()) return out;
  std::vector<std::vector<std::string>> batches;
  for (std::size_t i = 0; i < texts.size(); i += options_.max_batch)
    batches.emplace_back(texts.begin() + static_cast<std::ptrdiff_t>(i),
                         texts.begin() + static_cast<std::ptrdiff_t>(std::min(texts.size(), i + options_.max_batch)));
  std::vector<EmbedResult> results(batches.size());
  for (std::size_t start = 0; start < batches.size(); start += options_.max_in_flight) {
    const std::size_t end = std::min(batches.size(), start + options_.max_in_flight);
    std::vector<std::future<EmbedResult>> inflight;
    for (std::size_t b = start; b < end; ++b)
      inflight.push_back(std::async(std::launch::async, [this, &model, &batches, b] { return post_batch(model, batches[b]); }));
    for (std::size_t b = start; b < end; ++b) results[b] = inflight[b - start].get();
  }
  out.dim = results.front().dim;
  for (auto& r : results) {
    require(r.dim == out.dim, ErrorKind::Integrity, "embedding service changed dim between requests");
    for (auto& v : r.vectors) out.vectors.push_back(std::move(v));
  }
  return out;
}

}  // namespace clinbench::embeddings
