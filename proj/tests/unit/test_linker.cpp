#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "lbn/error.hpp"
#include "lbn/linker.hpp"
#include "synth.hpp"

using namespace lbn;
using lbn::test::relation_decl;

namespace {

TreeBN customers_with_salary() {
  TreeBN bn;
  bn.relation = "customers";
  bn.nodes = {"nationality", "hair", "salary"};
  bn.root = 0;
  bn.parent = {-1, 0, 0};
  bn.edge_weight = {0.0, 0.2, 0.4};
  bn.domain_sizes = {3, 3, 3};
  bn.cpts = {nullptr, nullptr, nullptr};
  return bn;
}

std::vector<std::string> decoded(const EncodedColumn& col) {
  std::vector<std::string> out;
  for (const auto c : col.codes) out.push_back(col.dictionary->decode(c));
  return out;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("lbn_test_" + name);
}

}  // namespace

TEST(Linker, ExportSets) {
  const auto bn = customers_with_salary();
  EXPECT_TRUE(select_export_set(bn, 0).attributes.empty());
  EXPECT_EQ(select_export_set(bn, 1).attributes, std::vector<std::string>{"nationality"});
  EXPECT_EQ(select_export_set(bn, 2).attributes, (std::vector<std::string>{"nationality", "salary"}));
  EXPECT_EQ(select_export_set(bn, 3).attributes.size(), 3u);
  EXPECT_THROW(select_export_set(bn, -1), ArgumentError);
  EXPECT_THROW(select_export_set(bn, 4), ArgumentError);
}

TEST(Linker, MaterializeImportsToy) {
  const auto catalog = lbn::test::toy_catalog();
  const auto& customers = catalog.relation("customers");
  const auto exports = select_export_set(build_bn(customers), 1);
  const auto joined = materialize_imports(catalog.relation("purchases"), customers, "customer_id", exports);
  const auto& col = joined.column("customer_id.nationality");
  EXPECT_EQ(decoded(col), (std::vector<std::string>{"Swedish", "Swedish", "Swedish", "Swedish", "Swedish", "Swedish",
                                                     "American"}));
  EXPECT_NEAR(marginal_from_counts(col).probs[static_cast<std::size_t>(*col.dictionary->code_of("Swedish"))],
              6.0 / 7.0, 1e-15);

  const auto unchanged = materialize_imports(catalog.relation("purchases"), customers, "customer_id",
                                             ExportSet{"customers", {}, 0});
  EXPECT_TRUE(unchanged.columns.empty());
}

TEST(Linker, DanglingForeignKeyImportsNull) {
  Schema schema;
  schema.relations = {relation_decl("c", {"x"}), relation_decl("p", {}, {{"c_id", "c"}})};
  std::map<std::string, RawTable> tables;
  tables["c"].header = {"id", "x"};
  tables["c"].rows = {{"1", "a"}, {"2", "b"}};
  tables["p"].header = {"id", "c_id"};
  tables["p"].rows = {{"1", "2"}, {"2", "99"}, {"3", std::nullopt}};
  const auto catalog = make_catalog(schema, tables);
  const auto& c = catalog.relation("c");
  const auto out = materialize_imports(catalog.relation("p"), c, "c_id", select_export_set(build_bn(c), 1));
  const auto& col = out.column("c_id.x");
  EXPECT_EQ(col.dictionary->decode(col.codes[0]), "b");
  EXPECT_EQ(col.codes[1], col.null_code());
  EXPECT_EQ(col.codes[2], col.null_code());
}

TEST(Linker, ToyNetworksAtK1) {
  const auto model = build_linked(lbn::test::toy_catalog(), {1});
  model.check();
  const auto& purchases = model.network("purchases").bn;
  EXPECT_EQ(purchases.size(), 2u);
  EXPECT_GE(purchases.index_of("customer_id.nationality"), 0);
  EXPECT_GE(purchases.index_of("shop_id.name"), 0);
  const auto* link = model.find_link("purchases", "customer_id");
  ASSERT_NE(link, nullptr);
  EXPECT_EQ(link->child, "customers");
  ASSERT_EQ(link->shared.size(), 1u);
  EXPECT_EQ(link->shared[0], (std::pair<std::string, std::string>{"nationality", "customer_id.nationality"}));
  EXPECT_EQ(model.join_card("purchases", "customer_id"), 7u);
  EXPECT_EQ(model.row_count("customers"), 5u);
}

TEST(Linker, PreAndPostJoinDistributionsDiffer) {
  const auto model = build_linked(lbn::test::toy_catalog(), {1});
  const auto& dict = model.dictionary("customers", "nationality");
  const auto swedish = static_cast<std::size_t>(*dict.code_of("Swedish"));
  const auto& customers = model.network("customers");
  EXPECT_NEAR(customers.marginals[static_cast<std::size_t>(customers.bn.index_of("nationality"))][swedish], 0.6, 1e-15);
  const auto& purchases = model.network("purchases");
  EXPECT_NEAR(purchases.marginals[static_cast<std::size_t>(purchases.bn.index_of("customer_id.nationality"))][swedish],
              6.0 / 7.0, 1e-15);
}

TEST(Linker, ToyNetworksAtK0AreSeparate) {
  const auto model = build_linked(lbn::test::toy_catalog(), {0});
  EXPECT_EQ(model.network("purchases").bn.size(), 0u);
  for (const auto& l : model.links) EXPECT_TRUE(l.shared.empty());
  EXPECT_EQ(model.network("customers").bn.size(), 2u);
}

TEST(Linker, ChainImportsRootsInOrder) {
  const auto db = lbn::test::chain(4, 3, 300);
  const auto model = build_linked(db.catalog(), {1});
  model.check();
  const auto& r2 = model.network("r2").bn;
  const auto& r1 = model.network("r1").bn;
  const auto& r0 = model.network("r0").bn;
  const auto r2_root = r2.nodes[static_cast<std::size_t>(r2.root)];
  EXPECT_GE(r1.index_of("next_id." + r2_root), 0);
  const auto r1_root = r1.nodes[static_cast<std::size_t>(r1.root)];
  EXPECT_GE(r0.index_of("next_id." + r1_root), 0);
  EXPECT_EQ(r0.size(), 4u);
  EXPECT_EQ(r1.size(), 4u);
  EXPECT_EQ(r2.size(), 3u);
}

TEST(Linker, DeeperExportsKeepChildEdges) {
  const auto db = lbn::test::chain(8, 2, 500);
  const auto model = build_linked(db.catalog(), {3});
  const auto& child = model.network("r1").bn;
  const auto& parent = model.network("r0").bn;
  auto adjacent = [&](int u, int v) {
    return parent.parent[static_cast<std::size_t>(u)] == v || parent.parent[static_cast<std::size_t>(v)] == u;
  };
  for (std::size_t i = 0; i < child.size(); ++i) {
    if (child.parent[i] < 0) continue;
    const auto up = child.nodes[static_cast<std::size_t>(child.parent[i])];
    const int v = parent.index_of("next_id." + child.nodes[i]);
    const int w = parent.index_of("next_id." + up);
    ASSERT_GE(v, 0);
    ASSERT_GE(w, 0);
    EXPECT_TRUE(adjacent(v, w)) << child.nodes[i];
  }
}

TEST(Linker, SchemaOverridesK) {
  auto db = lbn::test::chain(5, 2, 200);
  db.schema.relations[1].foreign_keys[0].k = 2;  // r0 is declared second
  ASSERT_EQ(db.schema.relations[1].name, "r0");
  const auto model = build_linked(db.catalog(), {1});
  EXPECT_EQ(model.find_link("r0", "next_id")->shared.size(), 2u);
  const auto plain = build_linked(db.catalog(), {1, false});
  EXPECT_EQ(plain.find_link("r0", "next_id")->shared.size(), 1u);
}

TEST(Linker, RoundTripAndVersion) {
  const auto model = build_linked(lbn::test::toy_catalog(), {1});
  const auto path = temp_path("toy.lbn");
  save_model(model, path);
  const auto loaded = load_model(path);
  EXPECT_TRUE(loaded == model);
  EXPECT_LT(std::filesystem::file_size(path), 100u * 1024u);

  auto text = serialize_model(model);
  const auto at = text.find("\"format_version\":1");
  ASSERT_NE(at, std::string::npos);
  text.replace(at, std::string("\"format_version\":1").size(), "\"format_version\":99");
  EXPECT_THROW(deserialize_model(text), ModelError);
  EXPECT_THROW(deserialize_model("{}"), ModelError);
  EXPECT_THROW(load_model(temp_path("missing.lbn")), IoError);
  std::filesystem::remove(path);
}

TEST(Linker, BiggerKGivesBiggerModel) {
  const auto catalog = lbn::test::toy_catalog();
  const auto k0 = serialize_model(build_linked(catalog, {0})).size();
  const auto k1 = serialize_model(build_linked(catalog, {1})).size();
  EXPECT_LT(k0, k1);
}

TEST(Linker, RejectsBadK) { EXPECT_THROW(build_linked(lbn::test::toy_catalog(), {-1}), ArgumentError); }
