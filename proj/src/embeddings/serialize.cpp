#include "embeddings/serialize.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "common/error.hpp"

namespace clinbench::embeddings {

std::string attribute_name(const std::string& column) {
  std::string out = column;
  for (char& c : out) c = c == '_' ? ' ' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string format_value(double value) {
  require(std::isfinite(value), ErrorKind::Numeric, "cannot serialize a non-finite value");
  if (value == 0.0) return "0";
  constexpr int kDigits = 4;
  char buf[400];
  // Round to significant digits first so the exponent reflects carries
  // (9.9996 becomes 10).
  std::snprintf(buf, sizeof buf, "%.*e", kDigits - 1, value);
  const double rounded = std::strtod(buf, nullptr);
  const int exponent = static_cast<int>(std::floor(std::log10(std::fabs(rounded))));
  const int decimals = std::max(0, kDigits - 1 - exponent);
  std::snprintf(buf, sizeof buf, "%.*f", decimals, rounded);
  std::string s = buf;
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  if (s == "-0") s = "0";
  return s;
}

SerializedRecord serialize(const data::PatientRecord& record, const data::CohortSchema& schema) {
  SerializedRecord out;
  for (std::size_t f = 0; f < schema.feature_count(); ++f) {
    const auto& spec = schema.features()[f];
    const std::size_t k = schema.kind_index(f);
    std::string value;
    if (spec.kind == data::FeatureKind::Categorical) {
      value = record.categorical_raw.at(k);
      if (value.empty()) value = "unknown";
    } else {
      const double raw = record.continuous_raw.at(k);
      value = std::isnan(raw) ? "unknown" : format_value(raw);
    }
    out.sentences.push_back("The " + attribute_name(spec.name) + " is " + value + ".");
  }
  for (std::size_t i = 0; i < out.sentences.size(); ++i) {
    if (i) out.joined += ' ';
    out.joined += out.sentences[i];
  }
  return out;
}

}  // namespace clinbench::embeddings
