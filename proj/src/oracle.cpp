#include "lbn/oracle.hpp"

#include <chrono>
#include <functional>
#include <map>

#include "lbn/error.hpp"

namespace lbn {

namespace {

std::uint64_t add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r = 0;
  if (__builtin_add_overflow(a, b, &r)) throw ResourceError("join count overflows 64 bits");
  return r;
}

std::uint64_t mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r = 0;
  if (__builtin_mul_overflow(a, b, &r)) throw ResourceError("join count overflows 64 bits");
  return r;
}

struct Edge {
  std::string parent;  // holds the FK
  std::string fk;
  std::string child;   // referenced
};

}  // namespace

Truth exact(const Catalog& catalog, const Query& query, const OracleOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  validate_query(query, catalog.schema);

  std::uint64_t rows = 0;
  for (const auto& r : query.relations) rows += catalog.relation(r).row_count;
  if (rows > options.max_rows) {
    throw ResourceError("oracle needs " + std::to_string(rows) + " rows, budget is " +
                        std::to_string(options.max_rows));
  }

  std::map<std::string, std::vector<Edge>> incident;
  for (const auto& j : query.joins) {
    Edge e{j.parent, j.fk, join_child(j, catalog.schema)};
    incident[e.parent].push_back(e);
    incident[e.child].push_back(e);
  }

  // Per-row pass masks.
  std::map<std::string, std::vector<char>> passes;
  for (const auto& r : query.relations) passes[r].assign(catalog.relation(r).row_count, 1);
  for (const auto& [key, codes] : collect_evidence(query, dictionaries_of(catalog))) {
    const auto& column = catalog.relation(key.first).column(key.second);
    std::vector<char> allowed(static_cast<std::size_t>(column.domain_size()), 0);
    for (const auto c : codes) allowed[static_cast<std::size_t>(c)] = 1;
    auto& mask = passes[key.first];
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (!allowed[static_cast<std::size_t>(column.codes[i])]) mask[i] = 0;
    }
  }

  std::map<std::string, std::vector<std::int32_t>> matches;  // "parent.fk" -> child row per parent row
  auto match = [&](const Edge& e) -> const std::vector<std::int32_t>& {
    const auto key = e.parent + "." + e.fk;
    auto it = matches.find(key);
    if (it == matches.end()) {
      it = matches.emplace(key, resolve_foreign_key(catalog.relation(e.parent), e.fk, catalog.relation(e.child))).first;
    }
    return it->second;
  };

  // Number of join tuples of the subtree hanging below `relation` (away from
  // `from`) that each of its rows takes part in.
  std::function<std::vector<std::uint64_t>(const std::string&, const std::string&, bool)> weights =
      [&](const std::string& relation, const std::string& from, bool filtered) {
        const auto n = catalog.relation(relation).row_count;
        std::vector<std::uint64_t> w(n, 1);
        if (filtered) {
          const auto& mask = passes.at(relation);
          for (std::size_t i = 0; i < n; ++i) w[i] = mask[i] ? 1 : 0;
        }
        for (const auto& e : incident[relation]) {
          const bool outgoing = e.parent == relation;
          const auto& other = outgoing ? e.child : e.parent;
          if (other == from) continue;
          const auto sub = weights(other, relation, filtered);
          const auto& m = match(e);
          if (outgoing) {
            for (std::size_t i = 0; i < n; ++i) {
              w[i] = m[i] < 0 ? 0 : mul(w[i], sub[static_cast<std::size_t>(m[i])]);
            }
          } else {
            std::vector<std::uint64_t> agg(n, 0);
            for (std::size_t y = 0; y < m.size(); ++y) {
              if (m[y] >= 0) agg[static_cast<std::size_t>(m[y])] = add(agg[static_cast<std::size_t>(m[y])], sub[y]);
            }
            for (std::size_t i = 0; i < n; ++i) w[i] = mul(w[i], agg[i]);
          }
        }
        return w;
      };

  const std::string root = options.root.value_or(query.relations.front());
  if (!passes.count(root)) throw ArgumentError("oracle root '" + root + "' is not in the query");
  Truth t;
  for (const auto v : weights(root, "", true)) t.qualifying = add(t.qualifying, v);
  for (const auto v : weights(root, "", false)) t.join_size = add(t.join_size, v);
  t.selectivity = t.join_size == 0 ? 0.0 : static_cast<double>(t.qualifying) / static_cast<double>(t.join_size);
  t.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return t;
}

}  // namespace lbn
