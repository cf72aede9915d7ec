#pragma once

#include <string>
#include <vector>

#include "data/cohort.hpp"
#include "data/schema.hpp"

namespace clinbench::embeddings {

/// One "The {attribute} is {value}." sentence per feature, in schema order.
struct SerializedRecord {
  std::vector<std::string> sentences;
  /// Sentences joined by single spaces.
  std::string joined;
};

/// Column name lowercased, underscores replaced by spaces.
std::string attribute_name(const std::string& column);

/// Up to 4 significant digits, plain decimal notation, no trailing zeros.
std::string format_value(double value);

SerializedRecord serialize(const data::PatientRecord& record, const data::CohortSchema& schema);

}  // namespace clinbench::embeddings
