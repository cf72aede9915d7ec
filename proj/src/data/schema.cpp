#include "data/schema.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "common/error.hpp"
#include "common/sha256.hpp"

namespace clinbench::data {

using nlohmann::json;

namespace {

std::string kind_name(FeatureKind k) { return k == FeatureKind::Categorical ? "categorical" : "continuous"; }

std::string get_string(const json& obj, const char* key, const char* where) {
  require(obj.contains(key) && obj.at(key).is_string(), ErrorKind::Schema,
          std::string(where) + ": missing string field '" + key + "'");
  return obj.at(key).get<std::string>();
}

}  // namespace

SchemaConfig schema_config_from_json(const json& doc) {
  require(doc.is_object(), ErrorKind::Schema, "schema document must be a JSON object");
  require(doc.contains("features") && doc.at("features").is_array(), ErrorKind::Schema,
          "schema: 'features' must be an array");
  SchemaConfig cfg;
  std::set<std::string> seen;
  for (const json& f : doc.at("features")) {
    FeatureSpec spec;
    spec.name = get_string(f, "name", "feature");
    const std::string kind = get_string(f, "kind", "feature");
    if (kind == "categorical") spec.kind = FeatureKind::Categorical;
    else if (kind == "continuous") spec.kind = FeatureKind::Continuous;
    else fail(ErrorKind::Schema, "feature '" + spec.name + "' has unknown kind '" + kind + "'");
    require(seen.insert(spec.name).second, ErrorKind::Schema, "duplicate feature name '" + spec.name + "'");
    cfg.features.push_back(std::move(spec));
  }
  require(!cfg.features.empty(), ErrorKind::Schema, "schema declares no features");
  require(doc.contains("endpoints") && doc.at("endpoints").is_object(), ErrorKind::Schema,
          "schema: 'endpoints' must be an object");
  const json& ep = doc.at("endpoints");
  cfg.endpoints.response = get_string(ep, "response", "endpoints");
  cfg.endpoints.os_time = get_string(ep, "os_time", "endpoints");
  cfg.endpoints.os_event = get_string(ep, "os_event", "endpoints");
  cfg.endpoints.pfs_time = get_string(ep, "pfs_time", "endpoints");
  cfg.endpoints.pfs_event = get_string(ep, "pfs_event", "endpoints");
  if (doc.contains("subgroup") && !doc.at("subgroup").is_null()) cfg.subgroup = doc.at("subgroup").get<std::string>();
  if (doc.contains("id") && !doc.at("id").is_null()) cfg.id_column = doc.at("id").get<std::string>();
  return cfg;
}

json to_json(const SchemaConfig& config) {
  json features = json::array();
  for (const auto& f : config.features) features.push_back({{"name", f.name}, {"kind", kind_name(f.kind)}});
  json doc = {{"features", features},
              {"endpoints",
               {{"response", config.endpoints.response},
                {"os_time", config.endpoints.os_time},
                {"os_event", config.endpoints.os_event},
                {"pfs_time", config.endpoints.pfs_time},
                {"pfs_event", config.endpoints.pfs_event}}},
              {"subgroup", config.subgroup ? json(*config.subgroup) : json(nullptr)}};
  if (config.id_column) doc["id"] = *config.id_column;
  return doc;
}

SchemaConfig load_schema_config(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Schema, "cannot parse schema '" + path + "': " + e.what());
  }
  return schema_config_from_json(doc);
}

Vocab::Vocab() : tokens_{"<missing>", "<unknown>"} {}

std::int64_t Vocab::add(const std::string& category) {
  if (category.empty()) return kMissing;
  auto [it, inserted] = ids_.emplace(category, static_cast<std::int64_t>(tokens_.size()));
  if (inserted) tokens_.push_back(category);
  return it->second;
}

std::int64_t Vocab::lookup(const std::string& cell) const {
  if (cell.empty()) return kMissing;
  auto it = ids_.find(cell);
  return it == ids_.end() ? kUnknown : it->second;
}

CohortSchema::CohortSchema(SchemaConfig config, std::vector<Vocab> vocabs, std::vector<ContinuousStats> stats)
    : config_(std::move(config)), vocabs_(std::move(vocabs)), stats_(std::move(stats)) {
  index_features();
}

void CohortSchema::index_features() {
  kind_index_.clear();
  std::size_t nc = 0, nn = 0;
  for (const auto& f : config_.features) kind_index_.push_back(f.kind == FeatureKind::Categorical ? nc++ : nn++);
  require(nc == vocabs_.size() && nn == stats_.size(), ErrorKind::Schema,
          "fitted schema does not match its feature declarations");
}

std::vector<std::size_t> CohortSchema::vocab_sizes() const {
  std::vector<std::size_t> sizes;
  for (const auto& v : vocabs_) sizes.push_back(v.size());
  return sizes;
}

json CohortSchema::to_json() const {
  json vocabs = json::array();
  for (const auto& v : vocabs_) vocabs.push_back(v.tokens());
  json stats = json::array();
  for (const auto& s : stats_)
    stats.push_back({{"median", s.median}, {"mean", s.mean}, {"std", s.std}, {"constant", s.constant}});
  return {{"config", data::to_json(config_)}, {"vocabs", vocabs}, {"continuous_stats", stats}};
}

CohortSchema CohortSchema::from_json(const json& doc) {
  require(doc.is_object() && doc.contains("config") && doc.contains("vocabs") && doc.contains("continuous_stats"),
          ErrorKind::Schema, "fitted schema JSON is missing fields");
  SchemaConfig cfg = schema_config_from_json(doc.at("config"));
  std::vector<Vocab> vocabs;
  for (const json& tokens : doc.at("vocabs")) {
    Vocab v;
    const auto list = tokens.get<std::vector<std::string>>();
    require(list.size() >= 2, ErrorKind::Schema, "vocabulary lacks reserved ids");
    for (std::size_t i = 2; i < list.size(); ++i) v.add(list[i]);
    vocabs.push_back(std::move(v));
  }
  std::vector<ContinuousStats> stats;
  for (const json& s : doc.at("continuous_stats")) {
    stats.push_back({s.at("median").get<double>(), s.at("mean").get<double>(), s.at("std").get<double>(),
                     s.at("constant").get<bool>()});
  }
  return CohortSchema(std::move(cfg), std::move(vocabs), std::move(stats));
}

std::string CohortSchema::hash() const { return sha256_hex(to_json().dump()); }

ContinuousStats compute_stats(std::vector<double> values) {
  ContinuousStats s;
  if (values.empty()) {
    s.median = s.mean = 0.0;
    s.std = 1.0;
    s.constant = true;
    return s;
  }
  double total = 0.0;
  for (double v : values) total += v;
  s.mean = total / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(values.size()));
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  s.median = n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  if (!(s.std > 0.0)) {
    s.constant = true;
    s.std = 1.0;
  }
  return s;
}

CohortSchema fit_schema(const RawTable& table, const SchemaConfig& config) {
  for (const auto& f : config.features) table.require_column(f.name);
  table.require_column(config.endpoints.response);
  table.require_column(config.endpoints.os_time);
  table.require_column(config.endpoints.os_event);
  table.require_column(config.endpoints.pfs_time);
  table.require_column(config.endpoints.pfs_event);
  if (config.subgroup) table.require_column(*config.subgroup);
  if (config.id_column) table.require_column(*config.id_column);

  std::vector<Vocab> vocabs;
  std::vector<ContinuousStats> stats;
  for (const auto& f : config.features) {
    const std::size_t col = *table.column(f.name);
    if (f.kind == FeatureKind::Categorical) {
      Vocab v;
      for (const auto& row : table.rows) v.add(row[col]);
      vocabs.push_back(std::move(v));
    } else {
      std::vector<double> values;
      for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const std::string& cell = table.rows[r][col];
        if (cell.empty()) continue;
        auto x = parse_number(cell);
        require(x.has_value(), ErrorKind::Parse,
                "non-numeric value '" + cell + "' in continuous column '" + f.name + "' at row " + std::to_string(r + 1));
        values.push_back(*x);
      }
      stats.push_back(compute_stats(std::move(values)));
    }
  }
  return CohortSchema(config, std::move(vocabs), std::move(stats));
}

}  // namespace clinbench::data
