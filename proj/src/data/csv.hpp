#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace clinbench::data {

/// Parsed CSV: a header row plus string cells. Empty cells are kept as "".
struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(std::string_view name) const;
  /// Column index or a schema error naming the column.
  std::size_t require_column(std::string_view name) const;
};

/// RFC 4180 reader: quoted fields, doubled quotes, CRLF or LF line ends, an
/// optional UTF-8 byte-order mark. Every row must have the header's width.
RawTable parse_csv(std::string_view text);
RawTable read_csv(const std::string& path);

std::string format_csv(const RawTable& table);

/// Parses a decimal number; nullopt when the text is not entirely a number.
std::optional<double> parse_number(std::string_view text);
/// Shortest text that parses back to exactly `value`.
std::string format_number(double value);

std::string read_text_file(const std::string& path);
/// Writes via a temporary sibling file and rename, so a failure never leaves
/// a partial file at `path`.
void write_text_file_atomic(const std::string& path, std::string_view contents);

}  // namespace clinbench::data
