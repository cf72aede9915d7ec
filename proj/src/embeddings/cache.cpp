#include "embeddings/cache.hpp"

#include <filesystem>
#include <fstream>

#include "common/error.hpp"
#include "common/sha256.hpp"
#include "data/csv.hpp"
#include "json.hpp"

namespace clinbench::embeddings {

using nlohmann::json;

std::string content_hash(const std::string& model_id, const std::string& text) {
  std::string buf = model_id;
  buf.push_back('\0');
  buf += text;
  return sha256_hex(buf);
}

EmbeddingCache::EmbeddingCache(std::string model_id, std::size_t dim) : model_id_(std::move(model_id)), dim_(dim) {
  require(!model_id_.empty(), ErrorKind::Validation, "embedding cache needs a model id");
  require(dim_ > 0, ErrorKind::Validation, "embedding dim must be positive");
}

const CacheEntry* EmbeddingCache::find(const std::string& text) const {
  const auto it = entries_.find(content_hash(model_id_, text));
  return it == entries_.end() ? nullptr : &it->second;
}

bool EmbeddingCache::insert(const std::string& text, std::vector<float> vector) {
  require(vector.size() == dim_, ErrorKind::Integrity,
          "vector of length " + std::to_string(vector.size()) + " in a cache of dim " + std::to_string(dim_));
  const std::string h = content_hash(model_id_, text);
  const auto it = entries_.find(h);
  if (it != entries_.end()) {
    require(it->second.vector == vector, ErrorKind::Integrity, "conflicting vectors for cached text (hash " + h + ")");
    return false;
  }
  entries_.emplace(h, CacheEntry{text, std::move(vector)});
  return true;
}

namespace {

std::string header_line(const std::string& model_id, std::size_t dim) {
  return json{{"model_id", model_id}, {"dim", dim}}.dump() + "\n";
}

std::string entry_line(const std::string& hash, const CacheEntry& e) {
  json v = json::array();
  // float -> double is exact, and so is the reverse on load.
  for (float x : e.vector) v.push_back(static_cast<double>(x));
  return json{{"hash", hash}, {"text", e.text}, {"vector", v}}.dump() + "\n";
}

std::pair<std::string, std::size_t> parse_header(const std::string& line, const std::string& path) {
  try {
    const json h = json::parse(line);
    return {h.at("model_id").get<std::string>(), h.at("dim").get<std::size_t>()};
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, path + ":1: bad cache header: " + e.what());
  }
}

}  // namespace

void EmbeddingCache::save(const std::string& path) const {
  std::string out = header_line(model_id_, dim_);
  for (const auto& [h, e] : entries_) out += entry_line(h, e);
  data::write_text_file_atomic(path, out);
}

std::pair<std::string, std::size_t> read_cache_header(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Io, "cannot open embedding cache " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::Parse, path + ": empty cache file");
  return parse_header(line, path);
}

EmbeddingCache EmbeddingCache::load(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Io, "cannot open embedding cache " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::Parse, path + ": empty cache file");
  const auto [model_id, dim] = parse_header(line, path);
  EmbeddingCache cache(model_id, dim);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    std::string hash, text;
    std::vector<float> vec;
    try {
      const json j = json::parse(line);
      hash = j.at("hash").get<std::string>();
      text = j.at("text").get<std::string>();
      for (const json& x : j.at("vector")) vec.push_back(static_cast<float>(x.get<double>()));
    } catch (const json::exception& e) {
      fail(ErrorKind::Parse, where + ": corrupted cache line: " + e.what());
    }
    require(hash == content_hash(model_id, text), ErrorKind::Integrity, where + ": hash does not match text");
    require(vec.size() == dim, ErrorKind::Integrity,
            where + ": vector has length " + std::to_string(vec.size()) + ", expected " + std::to_string(dim));
    cache.insert(text, std::move(vec));
  }
  return cache;
}

EmbeddingCache EmbeddingCache::open_or_create(const std::string& path, const std::string& model_id, std::size_t dim) {
  if (!std::filesystem::exists(path)) return EmbeddingCache(model_id, dim);
  EmbeddingCache c = load(path);
  require(c.model_id() == model_id && c.dim() == dim, ErrorKind::Integrity,
          path + " holds model '" + c.model_id() + "' dim " + std::to_string(c.dim()) + ", requested '" + model_id +
              "' dim " + std::to_string(dim));
  return c;
}

void EmbeddingCache::append(const std::string& path, const std::vector<std::string>& texts) const {
  std::string out;
  if (std::filesystem::exists(path) && std::filesystem::file_size(path) > 0) {
    const auto [m, d] = read_cache_header(path);
    require(m == model_id_ && d == dim_, ErrorKind::Integrity,
            path + " holds model '" + m + "' dim " + std::to_string(d) + ", cannot append '" + model_id_ + "' dim " +
                std::to_string(dim_));
  } else {
    out = header_line(model_id_, dim_);
  }
  for (const std::string& t : texts) {
    const std::string h = content_hash(model_id_, t);
    const auto it = entries_.find(h);
    require(it != entries_.end(), ErrorKind::Contract, "append: text is not in the cache");
    out += entry_line(h, it->second);
  }
  std::ofstream f(path, std::ios::app | std::ios::binary);
  require(f.good(), ErrorKind::Io, "cannot append to " + path);
  f << out;
  f.flush();
  require(f.good(), ErrorKind::Io, "write failed for " + path);
}

}  // namespace clinbench::embeddings
