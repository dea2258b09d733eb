#include <gtest/gtest.h>

#include <memory>

#include "brute.hpp"
#include "lbn/error.hpp"
#include "lbn/inference.hpp"
#include "synth.hpp"

using namespace lbn;

namespace {

const Catalog& toy() {
  static const auto catalog = lbn::test::toy_catalog();
  return catalog;
}

std::shared_ptr<const LinkedModel> toy_model(int k) {
  return std::make_shared<const LinkedModel>(build_linked(toy(), {k}));
}

Query toy_query() { return load_query(lbn::test::toy_dir() + "/query.json", toy().schema); }

Query parse(const std::string& sql) { return parse_sql(sql, toy().schema); }

}  // namespace

TEST(Inference, ToyQueryAtK1) {
  const LinkedEstimator est(toy_model(1));
  const auto e = est.estimate(toy_query());
  EXPECT_NEAR(e.selectivity, 4.0 / 7.0, 1e-12);
  EXPECT_NEAR(e.cardinality, 4.0, 1e-12);
  EXPECT_EQ(e.method, "k1");
  EXPECT_GE(e.elapsed_ms, 0.0);
}

TEST(Inference, ToyQueryAtK0) {
  const LinkedEstimator est(toy_model(0));
  EXPECT_NEAR(est.estimate(toy_query()).selectivity, 2.0 / 5.0, 1e-12);
}

TEST(Inference, RootEvidenceOnly) {
  const LinkedEstimator est(toy_model(1));
  const auto q = parse(
      "SELECT * FROM customers, purchases WHERE customers.id = purchases.customer_id "
      "AND customers.nationality = 'Swedish'");
  EXPECT_NEAR(est.raw_selectivity(q), 6.0 / 7.0, 1e-12);
  const auto single = parse("SELECT * FROM customers WHERE customers.nationality = 'Swedish'");
  EXPECT_NEAR(est.raw_selectivity(single), 3.0 / 5.0, 1e-12);
}

TEST(Inference, UnseenValueHitsTheFloor) {
  const auto model = toy_model(1);
  const auto q = parse(
      "SELECT * FROM customers, purchases WHERE customers.id = purchases.customer_id "
      "AND customers.nationality = 'Martian'");
  const auto clamped = LinkedEstimator(model).estimate(q);
  EXPECT_NEAR(clamped.selectivity, 1.0 / 14.0, 1e-12);
  EXPECT_EQ(LinkedEstimator(model, {false}).estimate(q).selectivity, 0.0);
}

TEST(Inference, StitchedShapes) {
  const auto model = toy_model(1);
  const auto three = parse(
      "SELECT * FROM customers, purchases, shops WHERE customers.id = purchases.customer_id "
      "AND purchases.shop_id = shops.id AND customers.hair = 'Blond' AND shops.city = 'Tokyo'");
  const auto tree = stitch(*model, three);
  // purchases' two imports, plus hair and the shops attribute not shared
  EXPECT_EQ(tree.nodes.size(), 4u);
  ASSERT_EQ(tree.roots().size(), 1u);
  const auto& root = tree.nodes[static_cast<std::size_t>(tree.roots()[0])];
  EXPECT_EQ(root.relation, "purchases");
  const int hair = tree.find("customers", "hair");
  ASSERT_GE(hair, 0);
  EXPECT_EQ(tree.nodes[static_cast<std::size_t>(tree.nodes[static_cast<std::size_t>(hair)].parent)].name,
            "customer_id.nationality");
  EXPECT_EQ(tree.find("customers", "nationality"), -1);  // replaced by its import

  const auto two = stitch(*model, toy_query());
  EXPECT_EQ(two.nodes.size(), 3u);
  EXPECT_EQ(two.find("shops", "city"), -1);

  const auto one = stitch(*model, parse("SELECT * FROM customers WHERE customers.hair = 'Blond'"));
  EXPECT_EQ(one.nodes.size(), 2u);
}

TEST(Inference, PruneDropsBarrenBranches) {
  const auto model = toy_model(1);
  const auto tree = stitch(*model, toy_query());
  const auto pruned = prune(tree);
  // only the customer branch carries evidence
  EXPECT_EQ(pruned.nodes.size(), 2u);
  EXPECT_NEAR(eliminate(pruned), eliminate(tree), 1e-15);
  EXPECT_NEAR(eliminate(pruned), 4.0 / 7.0, 1e-12);

  const auto all = parse(
      "SELECT * FROM customers WHERE customers.hair = 'Blond' AND customers.nationality = 'Swedish'");
  EXPECT_EQ(prune(stitch(*model, all)).nodes.size(), 2u);
}

TEST(Inference, PruneReRootsWithTheMarginal) {
  const auto model = toy_model(1);
  // evidence only on hair: the pruned tree is hair alone, carrying P(hair) after the join
  const auto q = parse(
      "SELECT * FROM customers, purchases WHERE customers.id = purchases.customer_id "
      "AND customers.hair = 'Blond'");
  const auto pruned = prune(stitch(*model, q));
  ASSERT_EQ(pruned.nodes.size(), 1u);
  EXPECT_EQ(pruned.nodes[0].name, "hair");
  EXPECT_NEAR(eliminate(pruned), 27.0 / 42.0, 1e-12);
}

TEST(Inference, EliminateMatchesEnumeration) {
  lbn::test::Rng rng(77);
  for (int i = 0; i < 200; ++i) {
    const auto tree = lbn::test::random_stitched_tree(rng, 4, 5);
    EXPECT_NEAR(eliminate(tree), lbn::test::brute_probability(tree), 1e-12) << i;
    EXPECT_NEAR(eliminate(prune(tree)), lbn::test::brute_probability(tree), 1e-12) << i;
  }
}

TEST(Inference, FastPathAgreesWithStitchPrune) {
  for (std::uint64_t seed = 0; seed < 150; ++seed) {
    const auto cat = lbn::test::random_db(seed).catalog();
    const auto model = std::make_shared<const LinkedModel>(build_linked(cat, {1}));
    lbn::test::Rng rng(seed);
    const auto q = lbn::test::random_query(cat, rng);
    const auto tree = stitch(*model, q);
    if (!tree.null_guards.empty()) continue;
    EXPECT_NEAR(LinkedEstimator(model, {false}).raw_selectivity(q), eliminate(prune(tree)), 1e-12) << seed;
  }
}

TEST(Inference, JoinSize) {
  const auto model = toy_model(1);
  EXPECT_EQ(join_size(*model, toy_query()), 7.0);
  EXPECT_EQ(join_size(*model, parse("SELECT * FROM shops")), 3.0);
  const auto three = parse(
      "SELECT * FROM customers, purchases, shops WHERE customers.id = purchases.customer_id "
      "AND purchases.shop_id = shops.id");
  EXPECT_EQ(join_size(*model, three), 7.0);
}

TEST(Inference, GoverningLinks) {
  const auto model = toy_model(1);
  const auto links = governing_links(*model, toy_query());
  ASSERT_EQ(links.size(), 1u);
  EXPECT_EQ(links[0]->child, "customers");
  EXPECT_TRUE(governing_links(*toy_model(0), toy_query()).empty());
  EXPECT_EQ(extract_relations(toy_query()).size(), 2u);
}

TEST(Inference, MalformedTreesAreCaught) {
  StitchedTree t;
  t.nodes.resize(1);
  t.nodes[0].domain_size = 2;
  EXPECT_THROW(t.check(), InternalError);
  t.nodes[0].prior = {0.5, 0.5};
  EXPECT_NO_THROW(t.check());
  t.nodes[0].evidence = {1};
  EXPECT_THROW(t.check(), InternalError);
  EXPECT_THROW(LinkedEstimator(nullptr), ArgumentError);
}
