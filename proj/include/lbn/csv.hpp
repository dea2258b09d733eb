#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lbn {

/// A parsed CSV file. Empty fields are represented as std::nullopt.
struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::optional<std::string>>> rows;

  /// Index of a header column, or -1.
  int column_index(const std::string& name) const;
};

/// RFC-4180 reader: quoted fields, doubled quotes, CRLF or LF line endings.
/// The first record is the header. A quoted empty field ("") is an empty
/// string, an unquoted empty field is null.
RawTable parse_csv(std::string_view text);

RawTable read_csv(const std::filesystem::path& path);

/// Quotes a field if it contains a delimiter, quote or line break.
std::string csv_escape(std::string_view field);

}  // namespace lbn
