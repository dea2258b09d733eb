#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "lbn/catalog.hpp"
#include "lbn/query.hpp"

namespace lbn {

struct Truth {
  std::uint64_t qualifying = 0;
  std::uint64_t join_size = 0;
  double selectivity = 0.0;  // 0 when the join is empty
  double elapsed_ms = 0.0;
};

struct OracleOptions {
  /// Upper bound on rows held across the queried relations.
  std::uint64_t max_rows = std::uint64_t{1} << 28;
  /// Relation the counting starts from; any choice gives the same result.
  std::optional<std::string> root;
};

/// Exact inner-join counts along the query's FK edges. Per-row match
/// multiplicities are propagated through the join tree instead of building
/// join tuples. Throws ResourceError past the row budget or on overflow.
Truth exact(const Catalog& catalog, const Query& query, const OracleOptions& options = {});

}  // namespace lbn
