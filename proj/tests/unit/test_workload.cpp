#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "brute.hpp"
#include "lbn/baselines.hpp"
#include "lbn/error.hpp"
#include "lbn/inference.hpp"
#include "lbn/workload.hpp"
#include "synth.hpp"

using namespace lbn;
using lbn::test::relation_decl;

namespace {

const Catalog& toy() {
  static const auto catalog = lbn::test::toy_catalog();
  return catalog;
}

std::shared_ptr<const Catalog> toy_ptr() {
  static const auto catalog = std::make_shared<const Catalog>(lbn::test::toy_catalog());
  return catalog;
}

Schema path_schema(int n) {
  Schema s;
  for (int i = 0; i < n; ++i) {
    std::vector<std::pair<std::string, std::string>> fks;
    if (i + 1 < n) fks.push_back({"next_id", "r" + std::to_string(i + 1)});
    s.relations.push_back(relation_decl("r" + std::to_string(i), {"x"}, fks));
  }
  s.validate();
  return s;
}

Query path_seed(int n) {
  Query q;
  for (int i = 0; i < n; ++i) {
    q.relations.push_back("r" + std::to_string(i));
    if (i + 1 < n) q.joins.push_back({"r" + std::to_string(i), "next_id"});
    q.predicates.push_back({"r" + std::to_string(i), "x", PredicateOp::kEq, {"a"}, 0, 0});
  }
  return q;
}

std::vector<BenchMethod> toy_methods() {
  std::vector<BenchMethod> methods;
  methods.push_back({std::make_shared<AviEstimator>(toy_ptr()), {"avi"}});
  for (int k = 0; k <= 1; ++k) {
    auto model = std::make_shared<const LinkedModel>(build_linked(toy(), {k}));
    methods.push_back({std::make_shared<LinkedEstimator>(model), {"k" + std::to_string(k)}});
  }
  return methods;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t line_count(const std::filesystem::path& p) {
  const auto text = slurp(p);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST(Workload, SingleRelationOneFilter) {
  const auto q = parse_sql("SELECT * FROM customers WHERE customers.hair = 'Blond'", toy().schema);
  EXPECT_EQ(expand(q, toy().schema).size(), 1u);
}

TEST(Workload, ThreeChainGivesSixteen) {
  const auto schema = path_schema(3);
  const auto out = expand(path_seed(3), schema);
  EXPECT_EQ(out.size(), 16u);
  std::set<std::string> printed;
  for (const auto& q : out) printed.insert(print_query(q));
  EXPECT_EQ(printed, lbn::test::brute_expand(path_seed(3), schema));
}

TEST(Workload, ToyWorkloadExpansion) {
  const auto spec = load_workload(lbn::test::toy_dir() + "/workload.json", toy().schema);
  const auto out = expand_workload(spec, toy().schema);
  // purchases has no predicates, so it never appears alone
  EXPECT_EQ(out.size(), 15u);
  std::set<std::string> printed;
  for (const auto& q : out) printed.insert(print_query(q));
  EXPECT_EQ(printed, lbn::test::brute_expand(spec.seeds.front(), toy().schema));
}

TEST(Workload, PathSubgraphCounts) {
  for (int n = 1; n <= 6; ++n) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
    const auto subs = connected_subgraphs(static_cast<std::size_t>(n), edges);
    EXPECT_EQ(subs.size(), static_cast<std::size_t>(n * (n + 1) / 2));
    EXPECT_EQ(subs, lbn::test::brute_connected_subgraphs(n, edges));
  }
}

TEST(Workload, MaxJoinsAndCap) {
  const auto schema = path_schema(4);
  const auto all = expand(path_seed(4), schema);
  for (const auto& q : expand(path_seed(4), schema, 1)) EXPECT_LE(q.join_count(), 1u);
  WorkloadSpec spec{{path_seed(4)}, std::nullopt, 10, 3};
  const auto capped = expand_workload(spec, schema);
  EXPECT_EQ(capped.size(), 10u);
  EXPECT_EQ(expand_workload(spec, schema), capped);
  for (std::size_t i = 1; i < capped.size(); ++i) EXPECT_LT(print_query(capped[i - 1]), print_query(capped[i]));
  spec.seed = 4;
  EXPECT_NE(expand_workload(spec, schema), capped);
  spec.seeds.push_back(path_seed(4));  // duplicates collapse
  spec.cap.reset();
  EXPECT_EQ(expand_workload(spec, schema).size(), all.size());
}

TEST(Workload, QError) {
  EXPECT_EQ(q_error(0.5, 0.5), 1.0);
  EXPECT_NEAR(q_error(2.0 / 5.0 * 7.0, 5.0), 25.0 / 14.0, 1e-15);
  EXPECT_NEAR(q_error(5.0, 2.0 / 5.0 * 7.0), 25.0 / 14.0, 1e-15);
  EXPECT_NEAR(q_error(8.0, 3.0), q_error(24.0, 9.0), 1e-15);
  EXPECT_THROW(q_error(0.0, 1.0), ArgumentError);
  EXPECT_EQ(cardinality_q_error(0.0, 0.2), 1.0);
  EXPECT_EQ(cardinality_q_error(0.0, 4.0), 4.0);
}

TEST(Workload, Quantiles) {
  EXPECT_EQ(nearest_rank({1, 2, 3, 4}, 0.5), 2.0);
  EXPECT_EQ(nearest_rank({1, 2, 3, 4}, 1.0), 4.0);
  const auto s = summarize("m", {3, 1, 2});
  EXPECT_EQ(s.count, 3u);
  EXPECT_EQ(s.median, 2.0);
  EXPECT_EQ(s.max, 3.0);
  EXPECT_DOUBLE_EQ(s.mean, 2.0);
  EXPECT_EQ(join_bucket(0), "0");
  EXPECT_EQ(join_bucket(5), "2-5");
  EXPECT_EQ(join_bucket(9), ">=6");
}

TEST(Workload, ToyBench) {
  const auto spec = load_workload(lbn::test::toy_dir() + "/workload.json", toy().schema);
  const auto queries = expand_workload(spec, toy().schema);
  const auto result = run_bench(toy(), toy_methods(), queries);
  EXPECT_EQ(result.query_count, 15u);
  EXPECT_EQ(result.records.size(), 45u);
  EXPECT_TRUE(result.skipped.empty());
  for (const auto& r : result.records) EXPECT_GE(r.q, 1.0);
  ASSERT_EQ(result.stats.size(), 3u);

  const auto dir = std::filesystem::temp_directory_path() / "lbn_test_report";
  std::filesystem::remove_all(dir);
  emit_report(result, dir);
  for (const char* f : {"records.csv", "qerror_summary.csv", "summary.json", "timing_by_joins.csv",
                        "sorted_qerrors.csv"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  EXPECT_EQ(line_count(dir / "records.csv"), 1u + 45u);
  EXPECT_EQ(line_count(dir / "qerror_summary.csv"), 1u + 3u);
  EXPECT_EQ(line_count(dir / "sorted_qerrors.csv"), 1u + 45u);
  EXPECT_EQ(line_count(dir / "timing_by_joins.csv"), 1u + 3u * 4u);
  EXPECT_NE(slurp(dir / "timing_by_joins.csv").find(">=6"), std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST(Workload, BenchIsDeterministic) {
  const auto spec = load_workload(lbn::test::toy_dir() + "/workload.json", toy().schema);
  const auto queries = expand_workload(spec, toy().schema);
  const auto a_dir = std::filesystem::temp_directory_path() / "lbn_test_det_a";
  const auto b_dir = std::filesystem::temp_directory_path() / "lbn_test_det_b";
  emit_report(run_bench(toy(), toy_methods(), queries), a_dir);
  BenchOptions parallel;
  parallel.jobs = 3;
  emit_report(run_bench(toy(), toy_methods(), queries, parallel), b_dir);
  EXPECT_EQ(slurp(a_dir / "records.csv"), slurp(b_dir / "records.csv"));
  EXPECT_EQ(slurp(a_dir / "qerror_summary.csv"), slurp(b_dir / "qerror_summary.csv"));
  std::filesystem::remove_all(a_dir);
  std::filesystem::remove_all(b_dir);
}

TEST(Workload, OracleFailuresAreSkipped) {
  const auto queries = expand(load_query(lbn::test::toy_dir() + "/query.json", toy().schema), toy().schema);
  BenchOptions tight;
  tight.oracle.max_rows = 6;  // customers alone fit, the join does not
  const auto result = run_bench(toy(), toy_methods(), queries, tight);
  EXPECT_FALSE(result.skipped.empty());
  EXPECT_EQ(result.query_count + result.skipped.size(), queries.size());
}

TEST(Workload, ParseErrors) {
  EXPECT_THROW(parse_workload("[]", toy().schema), QueryError);
  EXPECT_THROW(parse_workload(R"({"seeds": [{"relations": ["nope"]}]})", toy().schema), QueryError);
}
