#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "lbn/catalog.hpp"
#include "lbn/structure.hpp"

namespace lbn {

/// Attributes of a child network exported into a referencing relation.
struct ExportSet {
  std::string child;
  std::vector<std::string> attributes;  // selection order, root first
  int k = 0;
};

/// Root first, then breadth-first growth that always takes the frontier node
/// whose edge to the selected set carries the most mutual information (ties
/// by name). The result is parent-closed. Throws ArgumentError if k is
/// negative or larger than the network.
ExportSet select_export_set(const TreeBN& bn, int k);

/// A relation plus columns imported from referenced relations, named
/// "<fk>.<child attribute>".
struct AugmentedRelation {
  const RelationData* base = nullptr;
  std::map<std::string, EncodedColumn> imported;

  const EncodedColumn& column(const std::string& name) const;
};

/// Left join of `parent` with the exported columns of `child` through `fk`.
/// Unmatched or null FKs give the null code.
std::vector<std::pair<std::string, EncodedColumn>> import_columns(const RelationData& parent, const std::string& fk,
                                                                  const AugmentedRelation& child,
                                                                  const ExportSet& exports);

/// Parent relation with one extra modeled column per exported attribute.
RelationData materialize_imports(RelationData parent, const RelationData& child, const std::string& fk,
                                 const ExportSet& exports);

/// Where a network node's values come from.
struct NodeOrigin {
  std::string dictionary_key;  // "<relation>.<attribute>" of the owning column
  std::string fk;              // empty for the relation's own attributes
  std::string source;          // node name inside the referenced network
};

struct Network {
  TreeBN bn;
  std::vector<NodeOrigin> origins;
  /// Derived on build and load; not serialized.
  std::vector<std::vector<double>> marginals;
  /// Breadth-first node order; derived like `marginals`.
  std::vector<int> order;

  bool is_own(int node) const { return origins[static_cast<std::size_t>(node)].fk.empty(); }
};

/// One PK/FK edge: `parent.fk` references `child`. `shared` pairs each
/// exported child node with its copy inside the parent network.
struct Link {
  std::string parent;
  std::string fk;
  std::string child;
  int k = 0;
  std::vector<std::pair<std::string, std::string>> shared;
};

struct BuildStats {
  std::map<std::string, double> relation_seconds;
  double total_seconds = 0.0;
};

struct LinkedModel {
  static constexpr int kFormatVersion = 1;

  int k = 0;
  std::string schema_fingerprint;
  std::map<std::string, Network> networks;
  std::vector<Link> links;
  /// "<parent>.<fk>" -> parent rows whose FK matches a child row.
  std::map<std::string, std::uint64_t> join_cards;
  std::map<std::string, std::uint64_t> row_counts;
  std::map<std::string, std::shared_ptr<const Dictionary>> dictionaries;
  BuildStats stats;  // not serialized

  const Network& network(const std::string& relation) const;
  const Link* find_link(const std::string& parent, const std::string& fk) const;
  const Dictionary& dictionary(const std::string& relation, const std::string& attribute) const;
  std::uint64_t join_card(const std::string& parent, const std::string& fk) const;
  std::uint64_t row_count(const std::string& relation) const;

  /// Verifies link and network invariants; throws InternalError.
  void check() const;
  bool operator==(const LinkedModel& other) const;
};

struct LinkOptions {
  int k = 1;
  /// Honor per-FK `k` overrides from the schema.
  bool use_schema_overrides = true;
};

/// Builds per-relation networks in topological order, importing the export
/// sets of referenced networks before each referencing relation is learned.
/// The referencing relation's own attributes keep their own Chow-Liu tree;
/// imported columns are attached around it.
LinkedModel build_linked(const Catalog& catalog, const LinkOptions& options = {});

std::string serialize_model(const LinkedModel& model);
LinkedModel deserialize_model(const std::string& text);
void save_model(const LinkedModel& model, const std::filesystem::path& path);
LinkedModel load_model(const std::filesystem::path& path);

}  // namespace lbn
