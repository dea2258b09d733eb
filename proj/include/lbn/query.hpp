#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lbn/catalog.hpp"

namespace lbn {

enum class PredicateOp { kEq, kIn, kRange };

std::string to_string(PredicateOp op);

struct Predicate {
  std::string relation;
  std::string attribute;
  PredicateOp op = PredicateOp::kEq;
  std::vector<std::string> values;  // eq: one value; in: the set
  double lo = 0.0;                  // range only, closed interval
  double hi = 0.0;

  auto operator<=>(const Predicate&) const = default;
};

/// `parent.fk` references the relation named by the schema.
struct JoinEdge {
  std::string parent;
  std::string fk;

  auto operator<=>(const JoinEdge&) const = default;
};

struct Query {
  std::vector<std::string> relations;
  std::vector<JoinEdge> joins;
  std::vector<Predicate> predicates;

  std::size_t join_count() const { return joins.size(); }
  /// Relations, joins and predicates sorted; `in` value lists sorted and deduplicated.
  Query canonical() const;
  bool operator==(const Query& other) const;
};

/// Checks the query against the schema; throws QueryError.
void validate_query(const Query& query, const Schema& schema);

/// JSON query format:
///   {"relations": [...], "joins": [[parent, fk], ...],
///    "predicates": [{"relation", "attribute", "op": "eq"|"in"|"range",
///                    "value" | "values" | "lo","hi"}]}
Query parse_query(const std::string& json_text, const Schema& schema);
Query load_query(const std::filesystem::path& path, const Schema& schema);

/// SELECT * FROM r1 [alias], ... WHERE a.x = b.y AND r.attr = 'v' AND
/// r.attr IN ('a', 'b') AND r.num BETWEEN 1 AND 5
Query parse_sql(const std::string& sql, const Schema& schema);

/// Canonical JSON; parse_query(print_query(q)) == q.canonical().
std::string print_query(const Query& query);

/// Referenced relation of a join edge.
const std::string& join_child(const JoinEdge& join, const Schema& schema);

using DictionaryLookup = std::function<const Dictionary&(const std::string& relation, const std::string& attribute)>;

DictionaryLookup dictionaries_of(const Catalog& catalog);

/// Codes satisfying one predicate, ascending. Unseen values give no codes.
std::vector<std::int32_t> predicate_codes(const Predicate& predicate, const Dictionary& dictionary);

/// Allowed codes per (relation, attribute); predicates on the same attribute
/// intersect.
using EvidenceMap = std::map<std::pair<std::string, std::string>, std::vector<std::int32_t>>;
EvidenceMap collect_evidence(const Query& query, const DictionaryLookup& lookup);

}  // namespace lbn
