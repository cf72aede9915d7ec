#include "data/cohort.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>

#include "common/error.hpp"

namespace clinbench::data {

Cohort Cohort::subset(std::span<const std::size_t> indices) const {
  std::vector<PatientRecord> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(records_.at(i));
  return Cohort(std::move(out));
}

std::vector<std::size_t> Cohort::indices_of_subgroup(const std::string& subgroup) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < records_.size(); ++i)
    if (records_[i].subgroup == subgroup) idx.push_back(i);
  return idx;
}

std::vector<std::string> Cohort::subgroups() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& r : records_)
    if (!r.subgroup.empty() && seen.insert(r.subgroup).second) out.push_back(r.subgroup);
  return out;
}

std::size_t Cohort::responders() const {
  return static_cast<std::size_t>(std::count_if(records_.begin(), records_.end(), [](const auto& r) { return r.bor == 1; }));
}
std::size_t Cohort::os_events() const {
  return static_cast<std::size_t>(std::count_if(records_.begin(), records_.end(), [](const auto& r) { return r.os_event == 1; }));
}
std::size_t Cohort::pfs_events() const {
  return static_cast<std::size_t>(std::count_if(records_.begin(), records_.end(), [](const auto& r) { return r.pfs_event == 1; }));
}

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

double parse_time(const std::string& cell, const std::string& column, std::size_t row) {
  auto v = parse_number(cell);
  require(v.has_value(), ErrorKind::Validation,
          "row " + std::to_string(row) + ": '" + column + "' is not a number ('" + cell + "')");
  require(*v >= 0.0, ErrorKind::Validation,
          "row " + std::to_string(row) + ": negative survival time " + cell + " in '" + column + "'");
  return *v;
}

int parse_event(const std::string& cell, const std::string& column, std::size_t row) {
  auto v = parse_number(cell);
  require(v.has_value() && (*v == 0.0 || *v == 1.0), ErrorKind::Validation,
          "row " + std::to_string(row) + ": event indicator in '" + column + "' must be 0 or 1, got '" + cell + "'");
  return static_cast<int>(*v);
}

}  // namespace

int parse_response(const std::string& cell, std::size_t row) {
  const std::string v = lower(cell);
  if (v == "1" || v == "r" || v == "responder" || v == "true") return 1;
  if (v == "0" || v == "nr" || v == "non-responder" || v == "nonresponder" || v == "false") return 0;
  fail(ErrorKind::Validation, "row " + std::to_string(row) + ": unrecognized response label '" + cell + "'");
}

Cohort load_cohort(const RawTable& table, const CohortSchema& schema) {
  const SchemaConfig& cfg = schema.config();
  std::vector<std::size_t> feature_cols;
  for (const auto& f : cfg.features) feature_cols.push_back(table.require_column(f.name));
  const std::size_t c_resp = table.require_column(cfg.endpoints.response);
  const std::size_t c_os_t = table.require_column(cfg.endpoints.os_time);
  const std::size_t c_os_e = table.require_column(cfg.endpoints.os_event);
  const std::size_t c_pfs_t = table.require_column(cfg.endpoints.pfs_time);
  const std::size_t c_pfs_e = table.require_column(cfg.endpoints.pfs_event);
  std::optional<std::size_t> c_sub, c_id;
  if (cfg.subgroup) c_sub = table.require_column(*cfg.subgroup);
  if (cfg.id_column) c_id = table.require_column(*cfg.id_column);

  std::vector<PatientRecord> records;
  records.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t row_no = r + 1;
    PatientRecord rec;
    rec.id = c_id ? row[*c_id] : std::to_string(r);
    rec.categorical.reserve(schema.categorical_count());
    rec.continuous.reserve(schema.continuous_count());
    for (std::size_t f = 0; f < cfg.features.size(); ++f) {
      const std::string& cell = row[feature_cols[f]];
      const std::size_t k = schema.kind_index(f);
      if (cfg.features[f].kind == FeatureKind::Categorical) {
        rec.categorical.push_back(schema.vocabs()[k].lookup(cell));
        rec.categorical_raw.push_back(cell);
      } else {
        const ContinuousStats& st = schema.stats()[k];
        if (cell.empty()) {
          rec.continuous_raw.push_back(std::numeric_limits<double>::quiet_NaN());
          rec.continuous.push_back(st.normalize(st.median));
        } else {
          auto v = parse_number(cell);
          require(v.has_value(), ErrorKind::Parse,
                  "non-numeric value '" + cell + "' in continuous column '" + cfg.features[f].name + "' at row " +
                      std::to_string(row_no));
          rec.continuous_raw.push_back(*v);
          rec.continuous.push_back(st.normalize(*v));
        }
      }
    }
    rec.bor = parse_response(row[c_resp], row_no);
    rec.os_time = parse_time(row[c_os_t], cfg.endpoints.os_time, row_no);
    rec.os_event = parse_event(row[c_os_e], cfg.endpoints.os_event, row_no);
    rec.pfs_time = parse_time(row[c_pfs_t], cfg.endpoints.pfs_time, row_no);
    rec.pfs_event = parse_event(row[c_pfs_e], cfg.endpoints.pfs_event, row_no);
    if (c_sub) rec.subgroup = row[*c_sub];
    records.push_back(std::move(rec));
  }
  return Cohort(std::move(records));
}

Cohort load_cohort_file(const std::string& path, const CohortSchema& schema) {
  return load_cohort(read_csv(path), schema);
}

RawTable to_table(const Cohort& cohort, const CohortSchema& schema) {
  const SchemaConfig& cfg = schema.config();
  RawTable t;
  if (cfg.id_column) t.header.push_back(*cfg.id_column);
  for (const auto& f : cfg.features) t.header.push_back(f.name);
  t.header.insert(t.header.end(), {cfg.endpoints.response, cfg.endpoints.os_time, cfg.endpoints.os_event,
                                   cfg.endpoints.pfs_time, cfg.endpoints.pfs_event});
  const bool separate_subgroup =
      cfg.subgroup && std::none_of(cfg.features.begin(), cfg.features.end(),
                                   [&](const FeatureSpec& f) { return f.name == *cfg.subgroup; });
  if (separate_subgroup) t.header.push_back(*cfg.subgroup);

  for (const auto& rec : cohort.records()) {
    std::vector<std::string> row;
    if (cfg.id_column) row.push_back(rec.id);
    for (std::size_t f = 0; f < cfg.features.size(); ++f) {
      const std::size_t k = schema.kind_index(f);
      if (cfg.features[f].kind == FeatureKind::Categorical) {
        row.push_back(rec.categorical_raw[k]);
      } else {
        const double v = rec.continuous_raw[k];
        row.push_back(std::isnan(v) ? "" : format_number(v));
      }
    }
    row.push_back(std::to_string(rec.bor));
    row.push_back(format_number(rec.os_time));
    row.push_back(std::to_string(rec.os_event));
    row.push_back(format_number(rec.pfs_time));
    row.push_back(std::to_string(rec.pfs_event));
    if (separate_subgroup) row.push_back(rec.subgroup);
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace clinbench::data
