#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "data/csv.hpp"
#include "json.hpp"

namespace clinbench::data {

enum class FeatureKind { Categorical, Continuous };

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::Categorical;
};

struct EndpointColumns {
  std::string response;
  std::string os_time;
  std::string os_event;
  std::string pfs_time;
  std::string pfs_event;
};

/// The user-declared schema document (before fitting).
struct SchemaConfig {
  std::vector<FeatureSpec> features;
  EndpointColumns endpoints;
  std::optional<std::string> subgroup;
  /// Optional record identifier column; rows are numbered from 0 otherwise.
  std::optional<std::string> id_column;
};

SchemaConfig schema_config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const SchemaConfig& config);
SchemaConfig load_schema_config(const std::string& path);

/// Category vocabulary for one column. Ids 0 and 1 are reserved.
class Vocab {
 public:
  static constexpr std::int64_t kMissing = 0;
  static constexpr std::int64_t kUnknown = 1;

  Vocab();
  /// Adds a category if new; returns its id.
  std::int64_t add(const std::string& category);
  /// Id for a raw cell: missing for "", unknown for unseen categories.
  std::int64_t lookup(const std::string& cell) const;
  const std::string& token(std::int64_t id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, std::int64_t> ids_;
};

struct ContinuousStats {
  double median = 0.0;
  double mean = 0.0;
  double std = 1.0;
  /// Zero variance in training data; normalized values are passed through as 0.
  bool constant = false;

  double normalize(double raw) const { return constant ? 0.0 : (raw - mean) / std; }
  double denormalize(double z) const { return constant ? mean : z * std + mean; }
};

/// A schema fitted on training data: vocabularies and normalization stats.
class CohortSchema {
 public:
  CohortSchema() = default;
  CohortSchema(SchemaConfig config, std::vector<Vocab> vocabs, std::vector<ContinuousStats> stats);

  const SchemaConfig& config() const noexcept { return config_; }
  const std::vector<FeatureSpec>& features() const noexcept { return config_.features; }
  std::size_t feature_count() const noexcept { return config_.features.size(); }
  std::size_t categorical_count() const noexcept { return vocabs_.size(); }
  std::size_t continuous_count() const noexcept { return stats_.size(); }

  const std::vector<Vocab>& vocabs() const noexcept { return vocabs_; }
  const std::vector<ContinuousStats>& stats() const noexcept { return stats_; }
  std::vector<std::size_t> vocab_sizes() const;

  /// Index of feature `i` within its kind (categorical or continuous list).
  std::size_t kind_index(std::size_t feature) const { return kind_index_.at(feature); }

  nlohmann::json to_json() const;
  static CohortSchema from_json(const nlohmann::json& doc);
  /// SHA-256 of the canonical JSON form.
  std::string hash() const;

 private:
  void index_features();

  SchemaConfig config_;
  std::vector<Vocab> vocabs_;
  std::vector<ContinuousStats> stats_;
  std::vector<std::size_t> kind_index_;
};

/// Builds vocabularies and continuous statistics from the given table only.
CohortSchema fit_schema(const RawTable& table, const SchemaConfig& config);

/// Population statistics of the non-missing values; median of an even count
/// is the mean of the two middle values.
ContinuousStats compute_stats(std::vector<double> values);

}  // namespace clinbench::data
