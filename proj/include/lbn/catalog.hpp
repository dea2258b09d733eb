#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "lbn/csv.hpp"

namespace lbn {

enum class AttributeKind { kCategorical, kNumeric };

std::string to_string(AttributeKind kind);
AttributeKind attribute_kind_from_string(const std::string& text);

struct AttributeDecl {
  std::string name;
  AttributeKind kind = AttributeKind::kCategorical;
};

struct ForeignKeyDecl {
  std::string attribute;   // local column
  std::string references;  // referenced relation
  std::optional<int> k;    // per-edge override of the export count
};

struct RelationDecl {
  std::string name;
  std::filesystem::path path;
  std::string primary_key;
  std::vector<AttributeDecl> attributes;
  std::vector<ForeignKeyDecl> foreign_keys;

  bool is_key_column(const std::string& column) const;
  /// Declared attributes minus the PK and FK columns, in declaration order.
  std::vector<AttributeDecl> modeled_attributes() const;
  const AttributeDecl* find_attribute(const std::string& attribute) const;
  const ForeignKeyDecl* find_foreign_key(const std::string& attribute) const;
};

struct EncodingOptions {
  int max_bins = 32;
  /// Keep only the N most frequent categorical values; the rest collapse
  /// into kOtherLabel. Unset means no cap.
  std::optional<int> category_cap;
};

inline constexpr const char* kOtherLabel = "__other__";

struct Schema {
  std::vector<RelationDecl> relations;
  EncodingOptions encoding;

  const RelationDecl& relation(const std::string& name) const;
  const RelationDecl* find_relation(const std::string& name) const;

  /// Stable hash of names, keys, attribute kinds and FK edges (not paths).
  std::string fingerprint() const;

  /// Throws SchemaError on duplicate names, dangling or cyclic FKs.
  void validate() const;
};

Schema parse_schema(const std::string& json_text, const std::filesystem::path& base_dir = {});
Schema load_schema(const std::filesystem::path& path);

/// Children (referenced relations) before parents (referencing relations).
/// Ties are broken by relation name.
std::vector<std::string> topological_order(const Schema& schema);

/// Ordered value domain of one column. Codes index `values`; code
/// `values.size()` is the reserved null code.
class Dictionary {
 public:
  Dictionary() = default;
  Dictionary(AttributeKind kind, std::vector<std::string> values, std::vector<double> bin_edges = {});

  AttributeKind kind() const { return kind_; }
  const std::vector<std::string>& values() const { return values_; }
  /// Numeric only: values().size() + 1 ascending edges. Bin i covers
  /// [edges[i], edges[i+1]), the last bin is closed on the right.
  const std::vector<double>& bin_edges() const { return bin_edges_; }

  std::int32_t size() const { return static_cast<std::int32_t>(values_.size()); }
  std::int32_t null_code() const { return size(); }
  /// Number of codes including the null code.
  std::int32_t domain_size() const { return size() + 1; }

  std::optional<std::int32_t> code_of(const std::string& value) const;
  /// Numeric: the bin holding `value`, if any.
  std::optional<std::int32_t> bin_of(double value) const;
  /// Numeric: every bin overlapping [lo, hi].
  std::vector<std::int32_t> bins_overlapping(double lo, double hi) const;

  const std::string& decode(std::int32_t code) const;

  bool operator==(const Dictionary& other) const {
    return kind_ == other.kind_ && values_ == other.values_ && bin_edges_ == other.bin_edges_;
  }

 private:
  AttributeKind kind_ = AttributeKind::kCategorical;
  std::vector<std::string> values_;
  std::vector<double> bin_edges_;
  std::unordered_map<std::string, std::int32_t> lookup_;
};

struct EncodedColumn {
  std::shared_ptr<const Dictionary> dictionary;
  std::vector<std::int32_t> codes;

  std::int32_t null_code() const { return dictionary->null_code(); }
  std::int32_t domain_size() const { return dictionary->domain_size(); }
  std::size_t size() const { return codes.size(); }
};

/// Sentinel used by decode round-trips for null cells.
inline constexpr const char* kNullSentinel = "<null>";

struct RelationData {
  std::string name;
  std::size_t row_count = 0;
  /// Modeled attributes by name.
  std::map<std::string, EncodedColumn> columns;
  /// Modeled attribute names in declaration order.
  std::vector<std::string> attribute_order;
  /// PK and FK columns, dictionary encoded like the others.
  std::map<std::string, EncodedColumn> key_columns;
  std::unordered_map<std::string, std::uint32_t> pk_index;

  const EncodedColumn& column(const std::string& attribute) const;
  const EncodedColumn& key_column(const std::string& attribute) const;
};

/// Encodes one relation from an in-memory table.
RelationData ingest_relation(const RelationDecl& decl, const RawTable& table, const EncodingOptions& options = {});
/// Reads decl.path and encodes it.
RelationData ingest_relation(const RelationDecl& decl, const EncodingOptions& options = {});

/// Encodes a single column (exposed for tests and generators).
EncodedColumn encode_column(AttributeKind kind, std::span<const std::optional<std::string>> cells,
                            const EncodingOptions& options = {});

struct Catalog {
  Schema schema;
  std::map<std::string, RelationData> relations;

  const RelationData& relation(const std::string& name) const;
};

Catalog load_catalog(const std::filesystem::path& schema_path);
/// Builds a catalog from a schema and already-parsed tables keyed by relation name.
Catalog make_catalog(Schema schema, const std::map<std::string, RawTable>& tables);

/// For each row of `parent`, the matching row of `child` through FK column
/// `fk`, or -1 when the FK is null or dangling.
std::vector<std::int32_t> resolve_foreign_key(const RelationData& parent, const std::string& fk,
                                              const RelationData& child);

/// Copy of `relation` restricted to `rows` (in the given order); dictionaries are shared.
RelationData subset_rows(const RelationData& relation, std::span<const std::uint32_t> rows);

}  // namespace lbn
