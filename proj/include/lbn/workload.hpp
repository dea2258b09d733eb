#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lbn/catalog.hpp"
#include "lbn/estimate.hpp"
#include "lbn/oracle.hpp"
#include "lbn/query.hpp"

namespace lbn {

struct WorkloadSpec {
  std::vector<Query> seeds;
  std::optional<int> max_joins;
  /// Keep a uniform random subset of this many expanded queries.
  std::optional<std::size_t> cap;
  std::uint64_t seed = 0;
};

/// {"seeds": [query, ...], "max_joins": n|null, "cap": n|null, "seed": n}
WorkloadSpec parse_workload(const std::string& json_text, const Schema& schema);
WorkloadSpec load_workload(const std::filesystem::path& path, const Schema& schema);

/// Connected induced subgraphs of the relation/join graph, each a sorted
/// list of relation indices into `relations`.
std::vector<std::vector<int>> connected_subgraphs(std::size_t node_count,
                                                  const std::vector<std::pair<int, int>>& edges);

/// One query per connected induced subgraph of the seed times each non-empty
/// subset of the seed's predicates on that subgraph. Canonical, deduplicated,
/// sorted by canonical text.
std::vector<Query> expand(const Query& seed, const Schema& schema, std::optional<int> max_joins = {});

/// Expands every seed, deduplicates across seeds, then applies the cap.
std::vector<Query> expand_workload(const WorkloadSpec& spec, const Schema& schema);

/// max(a, b) / min(a, b) for positive inputs.
double q_error(double truth, double estimate);

/// Cardinality q-error with both sides floored at one tuple.
double cardinality_q_error(double true_cardinality, double estimated_cardinality);

struct QueryRecord {
  std::size_t query_id = 0;
  std::string query;  // canonical JSON
  std::size_t joins = 0;
  std::size_t filters = 0;
  std::string method;
  double true_cardinality = 0.0;
  double estimated_cardinality = 0.0;
  double true_selectivity = 0.0;
  double estimated_selectivity = 0.0;
  double q = 1.0;
  double elapsed_ms = 0.0;
  bool degenerate = false;
};

struct MethodStats {
  std::string method;
  std::size_t count = 0;
  double median = 0.0;
  double p90 = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

/// Nearest-rank quantile of an ascending sequence, p in (0, 1].
double nearest_rank(const std::vector<double>& sorted, double p);

MethodStats summarize(const std::string& method, std::vector<double> q_errors);

struct MethodInfo {
  std::string name;
  double construction_seconds = 0.0;
  std::size_t model_bytes = 0;
};

struct BenchMethod {
  std::shared_ptr<const Estimator> estimator;
  MethodInfo info;
};

struct SkippedQuery {
  std::size_t query_id = 0;
  std::string reason;
};

struct BenchResult {
  std::vector<QueryRecord> records;  // sorted by (query_id, method order)
  std::vector<MethodStats> stats;    // one per method, in method order
  std::vector<MethodInfo> methods;
  std::map<std::size_t, std::size_t> queries_by_joins;
  std::map<std::size_t, std::size_t> queries_by_filters;
  std::vector<SkippedQuery> skipped;
  std::size_t query_count = 0;
};

struct BenchOptions {
  int jobs = 1;
  OracleOptions oracle;
};

/// Oracle plus every method on every query. Queries whose oracle call fails
/// are skipped and reported.
BenchResult run_bench(const Catalog& catalog, const std::vector<BenchMethod>& methods,
                      const std::vector<Query>& queries, const BenchOptions& options = {});

/// Join-count bucket label used by the timing report: 0, 1, 2-5, >=6.
std::string join_bucket(std::size_t joins);

/// Writes records.csv, qerror_summary.csv, summary.json,
/// timing_by_joins.csv and sorted_qerrors.csv into `dir`.
void emit_report(const BenchResult& result, const std::filesystem::path& dir);

}  // namespace lbn
