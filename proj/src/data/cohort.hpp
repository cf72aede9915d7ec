#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "data/csv.hpp"
#include "data/schema.hpp"

namespace clinbench::data {

struct PatientRecord {
  std::string id;
  /// Vocabulary ids, one per categorical feature in schema order.
  std::vector<std::int64_t> categorical;
  /// z-scored values (median-imputed), one per continuous feature.
  std::vector<double> continuous;
  /// Original cells, kept for serialization; "" marks missing.
  std::vector<std::string> categorical_raw;
  /// Original values; NaN marks missing.
  std::vector<double> continuous_raw;

  int bor = 0;  ///< 1 responder, 0 non-responder
  double os_time = 0.0;
  int os_event = 0;
  double pfs_time = 0.0;
  int pfs_event = 0;
  std::string subgroup;
};

/// Immutable after load; subsets copy records.
class Cohort {
 public:
  Cohort() = default;
  explicit Cohort(std::vector<PatientRecord> records) : records_(std::move(records)) {}

  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const PatientRecord& operator[](std::size_t i) const { return records_.at(i); }
  const std::vector<PatientRecord>& records() const noexcept { return records_; }

  Cohort subset(std::span<const std::size_t> indices) const;
  std::vector<std::size_t> indices_of_subgroup(const std::string& subgroup) const;
  /// Distinct subgroup tags in order of first appearance.
  std::vector<std::string> subgroups() const;

  std::size_t responders() const;
  std::size_t os_events() const;
  std::size_t pfs_events() const;

 private:
  std::vector<PatientRecord> records_;
};

/// Parses a response label: 1/0, R/NR, responder/non-responder, true/false.
int parse_response(const std::string& cell, std::size_t row);

Cohort load_cohort(const RawTable& table, const CohortSchema& schema);
Cohort load_cohort_file(const std::string& path, const CohortSchema& schema);

/// Raw CSV form of a cohort (original values, schema column names).
RawTable to_table(const Cohort& cohort, const CohortSchema& schema);

}  // namespace clinbench::data
