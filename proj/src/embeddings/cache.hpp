#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace clinbench::embeddings {

/// SHA-256 (hex) of model_id, a NUL byte, then the text.
std::string content_hash(const std::string& model_id, const std::string& text);

struct CacheEntry {
  std::string text;
  std::vector<float> vector;
};

/// Content-addressed embedding store. On disk: a header line
/// {"model_id","dim"} followed by one {"hash","text","vector"} object per
/// line.
class EmbeddingCache {
 public:
  EmbeddingCache(std::string model_id, std::size_t dim);

  const std::string& model_id() const noexcept { return model_id_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return entries_.size(); }
  const std::map<std::string, CacheEntry>& entries() const noexcept { return entries_; }

  const CacheEntry* find(const std::string& text) const;
  /// Returns false when the text was already present with the same vector.
  bool insert(const std::string& text, std::vector<float> vector);

  /// Full rewrite (entries ordered by hash), atomically replacing `path`.
  void save(const std::string& path) const;
  static EmbeddingCache load(const std::string& path);
  /// Loads `path` if it exists, else starts empty.
  static EmbeddingCache open_or_create(const std::string& path, const std::string& model_id, std::size_t dim);

  /// Appends entries to `path`, writing the header when the file is new.
  /// An existing file with another model id or dim is an integrity error.
  void append(const std::string& path, const std::vector<std::string>& texts) const;

 private:
  std::string model_id_;
  std::size_t dim_;
  std::map<std::string, CacheEntry> entries_;
};

/// Reads just the header of a cache file.
std::pair<std::string, std::size_t> read_cache_header(const std::string& path);

}  // namespace clinbench::embeddings
