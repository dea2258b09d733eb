#include "lbn/catalog.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "lbn/error.hpp"
#include "lbn/hash.hpp"

namespace lbn {

using nlohmann::json;

std::string to_string(AttributeKind kind) {
  return kind == AttributeKind::kNumeric ? "numeric" : "categorical";
}

AttributeKind attribute_kind_from_string(const std::string& text) {
  if (text == "categorical") return AttributeKind::kCategorical;
  if (text == "numeric") return AttributeKind::kNumeric;
  throw SchemaError("unknown attribute kind '" + text + "'");
}

// ---------------------------------------------------------------------------
// Schema

bool RelationDecl::is_key_column(const std::string& column) const {
  if (column == primary_key) return true;
  return find_foreign_key(column) != nullptr;
}

std::vector<AttributeDecl> RelationDecl::modeled_attributes() const {
  std::vector<AttributeDecl> out;
  for (const auto& a : attributes) {
    if (!is_key_column(a.name)) out.push_back(a);
  }
  return out;
}

const AttributeDecl* RelationDecl::find_attribute(const std::string& attribute) const {
  for (const auto& a : attributes) {
    if (a.name == attribute) return &a;
  }
  return nullptr;
}

const ForeignKeyDecl* RelationDecl::find_foreign_key(const std::string& attribute) const {
  for (const auto& fk : foreign_keys) {
    if (fk.attribute == attribute) return &fk;
  }
  return nullptr;
}

const RelationDecl* Schema::find_relation(const std::string& name) const {
  for (const auto& r : relations) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

const RelationDecl& Schema::relation(const std::string& name) const {
  const auto* r = find_relation(name);
  if (r == nullptr) throw SchemaError("unknown relation '" + name + "'");
  return *r;
}

std::string Schema::fingerprint() const {
  json doc = json::array();
  for (const auto& r : relations) {
    json rel;
    rel["name"] = r.name;
    rel["pk"] = r.primary_key;
    json attrs = json::array();
    for (const auto& a : r.attributes) attrs.push_back({a.name, to_string(a.kind)});
    rel["attributes"] = attrs;
    json fks = json::array();
    for (const auto& fk : r.foreign_keys) fks.push_back({fk.attribute, fk.references});
    rel["fks"] = fks;
    doc.push_back(rel);
  }
  const std::uint64_t h = fnv1a(doc.dump());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void Schema::validate() const {
  std::set<std::string> names;
  for (const auto& r : relations) {
    if (r.name.empty()) throw SchemaError("relation with empty name");
    if (!names.insert(r.name).second) throw SchemaError("duplicate relation '" + r.name + "'");
    if (r.primary_key.empty()) throw SchemaError("relation '" + r.name + "' has no primary key");
    std::set<std::string> attrs;
    for (const auto& a : r.attributes) {
      if (!attrs.insert(a.name).second) {
        throw SchemaError("duplicate attribute '" + a.name + "' in relation '" + r.name + "'");
      }
    }
    std::set<std::string> fk_columns;
    for (const auto& fk : r.foreign_keys) {
      if (!fk_columns.insert(fk.attribute).second) {
        throw SchemaError("duplicate foreign key '" + fk.attribute + "' in relation '" + r.name + "'");
      }
      if (fk.attribute == r.primary_key) {
        throw SchemaError("foreign key '" + fk.attribute + "' of '" + r.name + "' is its primary key");
      }
      if (fk.k && *fk.k < 0) throw SchemaError("negative k override on '" + r.name + "." + fk.attribute + "'");
    }
  }
  for (const auto& r : relations) {
    for (const auto& fk : r.foreign_keys) {
      if (find_relation(fk.references) == nullptr) {
        throw SchemaError("foreign key '" + r.name + "." + fk.attribute + "' references unknown relation '" +
                          fk.references + "'");
      }
    }
  }
  // Acyclicity: a complete topological order exists.
  (void)topological_order(*this);
}

Schema parse_schema(const std::string& json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("schema is not valid JSON: ") + e.what());
  }
  Schema schema;
  try {
    if (!doc.contains("relations") || !doc["relations"].is_array()) {
      throw SchemaError("schema needs a 'relations' array");
    }
    for (const auto& r : doc["relations"]) {
      RelationDecl decl;
      decl.name = r.at("name").get<std::string>();
      const std::filesystem::path p = r.value("path", std::string{});
      decl.path = p.empty() || p.is_absolute() ? p : base_dir / p;
      decl.primary_key = r.at("primary_key").get<std::string>();
      for (const auto& a : r.value("attributes", json::array())) {
        decl.attributes.push_back(
            {a.at("name").get<std::string>(), attribute_kind_from_string(a.value("kind", std::string("categorical")))});
      }
      for (const auto& fk : r.value("foreign_keys", json::array())) {
        ForeignKeyDecl f;
        f.attribute = fk.at("attribute").get<std::string>();
        f.references = fk.at("references").get<std::string>();
        if (fk.contains("k")) f.k = fk["k"].get<int>();
        decl.foreign_keys.push_back(std::move(f));
      }
      schema.relations.push_back(std::move(decl));
    }
    if (doc.contains("encoding")) {
      const auto& enc = doc["encoding"];
      schema.encoding.max_bins = enc.value("max_bins", 32);
      if (enc.contains("category_cap") && !enc["category_cap"].is_null()) {
        schema.encoding.category_cap = enc["category_cap"].get<int>();
      }
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed schema: ") + e.what());
  }
  if (schema.encoding.max_bins < 1) throw SchemaError("encoding.max_bins must be positive");
  schema.validate();
  return schema;
}

Schema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read schema " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_schema(buffer.str(), path.parent_path());
}

std::vector<std::string> topological_order(const Schema& schema) {
  // Kahn's algorithm on child->parent edges: a relation is ready once every
  // relation it references has been emitted.
  std::map<std::string, int> pending;
  std::map<std::string, std::vector<std::string>> referenced_by;
  for (const auto& r : schema.relations) {
    std::set<std::string> targets;
    for (const auto& fk : r.foreign_keys) targets.insert(fk.references);
    pending[r.name] = static_cast<int>(targets.size());
    for (const auto& t : targets) referenced_by[t].push_back(r.name);
  }
  std::set<std::string> ready;
  for (const auto& [name, count] : pending) {
    if (count == 0) ready.insert(name);
  }
  std::vector<std::string> order;
  while (!ready.empty()) {
    const std::string next = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(next);
    for (const auto& dependent : referenced_by[next]) {
      if (--pending[dependent] == 0) ready.insert(dependent);
    }
  }
  if (order.size() != schema.relations.size()) {
    std::string stuck;
    for (const auto& [name, count] : pending) {
      if (count > 0) stuck += (stuck.empty() ? "" : ", ") + name;
    }
    throw SchemaError("foreign-key cycle among relations: " + stuck);
  }
  return order;
}

// ---------------------------------------------------------------------------
// Dictionary

Dictionary::Dictionary(AttributeKind kind, std::vector<std::string> values, std::vector<double> bin_edges)
    : kind_(kind), values_(std::move(values)), bin_edges_(std::move(bin_edges)) {
  if (kind_ == AttributeKind::kNumeric && !values_.empty() && bin_edges_.size() != values_.size() + 1) {
    throw DataError("numeric dictionary needs one more bin edge than bins");
  }
  lookup_.reserve(values_.size());
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!lookup_.emplace(values_[i], static_cast<std::int32_t>(i)).second) {
      throw DataError("duplicate dictionary entry '" + values_[i] + "'");
    }
  }
}

std::optional<std::int32_t> Dictionary::code_of(const std::string& value) const {
  const auto it = lookup_.find(value);
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::int32_t> Dictionary::bin_of(double value) const {
  if (bin_edges_.empty() || std::isnan(value)) return std::nullopt;
  if (value < bin_edges_.front() || value > bin_edges_.back()) return std::nullopt;
  const auto it = std::upper_bound(bin_edges_.begin(), bin_edges_.end(), value);
  auto bin = static_cast<std::int32_t>(it - bin_edges_.begin()) - 1;
  return std::min(bin, size() - 1);
}

std::vector<std::int32_t> Dictionary::bins_overlapping(double lo, double hi) const {
  std::vector<std::int32_t> out;
  for (std::int32_t i = 0; i < size(); ++i) {
    const double a = bin_edges_[i];
    const double b = bin_edges_[i + 1];
    const bool last = i + 1 == size();
    if (hi >= a && (last ? lo <= b : lo < b)) out.push_back(i);
  }
  return out;
}

const std::string& Dictionary::decode(std::int32_t code) const {
  static const std::string null_sentinel = kNullSentinel;
  if (code == null_code()) return null_sentinel;
  return values_.at(static_cast<std::size_t>(code));
}

// ---------------------------------------------------------------------------
// Ingestion

namespace {

std::optional<double> parse_number(const std::string& text) {
  double value = 0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  while (begin < end && *begin == ' ') ++begin;
  while (end > begin && end[-1] == ' ') --end;
  if (begin < end && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

std::string format_edge(double v) {
  std::ostringstream out;
  out.precision(15);
  out << v;
  return out.str();
}

EncodedColumn encode_categorical(std::span<const std::optional<std::string>> cells, const EncodingOptions& options) {
  std::map<std::string, std::size_t> counts;
  for (const auto& cell : cells) {
    if (cell) ++counts[*cell];
  }
  std::set<std::string> kept;
  bool collapsed = false;
  if (options.category_cap && static_cast<std::size_t>(*options.category_cap) < counts.size()) {
    std::vector<std::pair<std::string, std::size_t>> by_freq(counts.begin(), counts.end());
    std::stable_sort(by_freq.begin(), by_freq.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    for (int i = 0; i < *options.category_cap; ++i) kept.insert(by_freq[static_cast<std::size_t>(i)].first);
    collapsed = true;
  } else {
    for (const auto& [value, count] : counts) kept.insert(value);
  }
  std::vector<std::string> values(kept.begin(), kept.end());
  if (collapsed && !kept.count(kOtherLabel)) {
    values.push_back(kOtherLabel);
    std::sort(values.begin(), values.end());
  }
  auto dictionary = std::make_shared<Dictionary>(AttributeKind::kCategorical, std::move(values));
  EncodedColumn column{dictionary, {}};
  column.codes.reserve(cells.size());
  const auto other = dictionary->code_of(kOtherLabel);
  for (const auto& cell : cells) {
    if (!cell) {
      column.codes.push_back(dictionary->null_code());
    } else if (auto code = dictionary->code_of(*cell)) {
      column.codes.push_back(*code);
    } else {
      column.codes.push_back(*other);
    }
  }
  return column;
}

EncodedColumn encode_numeric(std::span<const std::optional<std::string>> cells, const EncodingOptions& options) {
  std::vector<std::optional<double>> parsed(cells.size());
  std::vector<double> sorted;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!cells[i]) continue;
    auto v = parse_number(*cells[i]);
    if (!v || std::isnan(*v)) throw DataError("non-numeric value '" + *cells[i] + "' in numeric column");
    parsed[i] = *v;
    sorted.push_back(*v);
  }
  std::sort(sorted.begin(), sorted.end());

  // Equi-depth cut points: the first value of each of `max_bins` equal-count
  // slices, deduplicated; the maximum closes the last bin.
  std::vector<double> edges;
  if (!sorted.empty()) {
    const std::size_t n = sorted.size();
    const auto bins = static_cast<std::size_t>(options.max_bins);
    for (std::size_t j = 0; j < bins; ++j) {
      const double cut = sorted[j * n / bins];
      if (edges.empty() || cut > edges.back()) edges.push_back(cut);
    }
    edges.push_back(sorted.back());
  }
  std::vector<std::string> labels;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    const bool last = i + 2 == edges.size();
    labels.push_back("[" + format_edge(edges[i]) + "," + format_edge(edges[i + 1]) + (last ? "]" : ")"));
  }
  // Labels of a degenerate final bin [v,v] can collide with nothing else, but
  // guard against identical labels from formatting precision.
  for (std::size_t i = 1; i < labels.size(); ++i) {
    if (labels[i] == labels[i - 1]) labels[i] += "#" + std::to_string(i);
  }
  auto dictionary = std::make_shared<Dictionary>(AttributeKind::kNumeric, std::move(labels), edges);
  EncodedColumn column{dictionary, {}};
  column.codes.reserve(cells.size());
  for (const auto& v : parsed) {
    column.codes.push_back(v ? *dictionary->bin_of(*v) : dictionary->null_code());
  }
  return column;
}

}  // namespace

EncodedColumn encode_column(AttributeKind kind, std::span<const std::optional<std::string>> cells,
                            const EncodingOptions& options) {
  return kind == AttributeKind::kNumeric ? encode_numeric(cells, options) : encode_categorical(cells, options);
}

RelationData ingest_relation(const RelationDecl& decl, const RawTable& table, const EncodingOptions& options) {
  RelationData data;
  data.name = decl.name;
  data.row_count = table.rows.size();

  auto column_cells = [&](const std::string& name) {
    const int idx = table.column_index(name);
    if (idx < 0) throw DataError("relation '" + decl.name + "': missing column '" + name + "'");
    std::vector<std::optional<std::string>> cells;
    cells.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const auto& row = table.rows[r];
      if (static_cast<std::size_t>(idx) >= row.size()) {
        cells.emplace_back(std::nullopt);
      } else {
        cells.push_back(row[static_cast<std::size_t>(idx)]);
      }
    }
    return cells;
  };

  {
    auto pk_cells = column_cells(decl.primary_key);
    data.pk_index.reserve(pk_cells.size());
    for (std::size_t r = 0; r < pk_cells.size(); ++r) {
      if (!pk_cells[r]) {
        throw DataError("relation '" + decl.name + "': null primary key at row " + std::to_string(r + 1));
      }
      if (!data.pk_index.emplace(*pk_cells[r], static_cast<std::uint32_t>(r)).second) {
        throw DataError("relation '" + decl.name + "': duplicate primary key '" + *pk_cells[r] + "'");
      }
    }
    data.key_columns.emplace(decl.primary_key, encode_categorical(pk_cells, EncodingOptions{}));
  }
  for (const auto& fk : decl.foreign_keys) {
    auto cells = column_cells(fk.attribute);
    data.key_columns.emplace(fk.attribute, encode_categorical(cells, EncodingOptions{}));
  }
  for (const auto& attr : decl.modeled_attributes()) {
    auto cells = column_cells(attr.name);
    try {
      data.columns.emplace(attr.name, encode_column(attr.kind, cells, options));
    } catch (const DataError& e) {
      throw DataError("relation '" + decl.name + "', attribute '" + attr.name + "': " + e.what());
    }
    data.attribute_order.push_back(attr.name);
  }
  return data;
}

RelationData ingest_relation(const RelationDecl& decl, const EncodingOptions& options) {
  return ingest_relation(decl, read_csv(decl.path), options);
}

const EncodedColumn& RelationData::column(const std::string& attribute) const {
  const auto it = columns.find(attribute);
  if (it == columns.end()) throw DataError("relation '" + name + "' has no modeled attribute '" + attribute + "'");
  return it->second;
}

const EncodedColumn& RelationData::key_column(const std::string& attribute) const {
  const auto it = key_columns.find(attribute);
  if (it == key_columns.end()) throw DataError("relation '" + name + "' has no key column '" + attribute + "'");
  return it->second;
}

const RelationData& Catalog::relation(const std::string& name) const {
  const auto it = relations.find(name);
  if (it == relations.end()) throw SchemaError("unknown relation '" + name + "'");
  return it->second;
}

Catalog load_catalog(const std::filesystem::path& schema_path) {
  Catalog catalog;
  catalog.schema = load_schema(schema_path);
  for (const auto& decl : catalog.schema.relations) {
    catalog.relations.emplace(decl.name, ingest_relation(decl, catalog.schema.encoding));
  }
  return catalog;
}

Catalog make_catalog(Schema schema, const std::map<std::string, RawTable>& tables) {
  schema.validate();
  Catalog catalog;
  catalog.schema = std::move(schema);
  for (const auto& decl : catalog.schema.relations) {
    const auto it = tables.find(decl.name);
    if (it == tables.end()) throw DataError("no table supplied for relation '" + decl.name + "'");
    catalog.relations.emplace(decl.name, ingest_relation(decl, it->second, catalog.schema.encoding));
  }
  return catalog;
}

std::vector<std::int32_t> resolve_foreign_key(const RelationData& parent, const std::string& fk,
                                              const RelationData& child) {
  const auto& column = parent.key_column(fk);
  const auto& values = column.dictionary->values();
  std::vector<std::int32_t> by_code(values.size() + 1, -1);
  for (std::size_t c = 0; c < values.size(); ++c) {
    const auto it = child.pk_index.find(values[c]);
    if (it != child.pk_index.end()) by_code[c] = static_cast<std::int32_t>(it->second);
  }
  std::vector<std::int32_t> rows(column.codes.size());
  for (std::size_t r = 0; r < rows.size(); ++r) rows[r] = by_code[static_cast<std::size_t>(column.codes[r])];
  return rows;
}

RelationData subset_rows(const RelationData& relation, std::span<const std::uint32_t> rows) {
  RelationData out;
  out.name = relation.name;
  out.row_count = rows.size();
  out.attribute_order = relation.attribute_order;
  auto copy = [&](const EncodedColumn& col) {
    EncodedColumn c{col.dictionary, {}};
    c.codes.reserve(rows.size());
    for (const auto r : rows) c.codes.push_back(col.codes[r]);
    return c;
  };
  for (const auto& [name, col] : relation.columns) out.columns.emplace(name, copy(col));
  for (const auto& [name, col] : relation.key_columns) out.key_columns.emplace(name, copy(col));
  // Rebuild the PK index from the surviving rows.
  std::vector<const std::string*> pk_of_row(relation.row_count, nullptr);
  for (const auto& [value, row] : relation.pk_index) pk_of_row[row] = &value;
  out.pk_index.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.pk_index.emplace(*pk_of_row[rows[i]], static_cast<std::uint32_t>(i));
  }
  return out;
}

}  // namespace lbn
