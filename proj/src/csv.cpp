#include "lbn/csv.hpp"

#include <fstream>
#include <sstream>

#include "lbn/error.hpp"

namespace lbn {

int RawTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

RawTable parse_csv(std::string_view text) {
  RawTable table;
  std::vector<std::optional<std::string>> record;
  std::string field;
  bool quoted = false;
  bool field_was_quoted = false;
  bool record_has_content = false;

  auto finish_field = [&] {
    if (field.empty() && !field_was_quoted) {
      record.emplace_back(std::nullopt);
    } else {
      record.emplace_back(std::move(field));
    }
    field.clear();
    field_was_quoted = false;
  };
  auto finish_record = [&] {
    finish_field();
    if (table.header.empty() && table.rows.empty()) {
      for (auto& f : record) table.header.push_back(f.value_or(""));
    } else {
      table.rows.push_back(std::move(record));
    }
    record.clear();
    record_has_content = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        field_was_quoted = true;
        record_has_content = true;
        break;
      case ',':
        finish_field();
        record_has_content = true;
        break;
      case '\r':
        break;
      case '\n':
        if (record_has_content || !field.empty()) {
          finish_record();
        }
        break;
      default:
        field.push_back(c);
        record_has_content = true;
    }
  }
  if (quoted) throw DataError("unterminated quoted field in CSV input");
  if (record_has_content || !field.empty()) finish_record();
  return table;
}

RawTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str());
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (const char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace lbn
