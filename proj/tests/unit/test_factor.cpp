#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lbn/error.hpp"
#include "lbn/factor.hpp"
#include "synth.hpp"

using namespace lbn;

namespace {

const RelationData& customers() {
  static const auto catalog = lbn::test::toy_catalog();
  return catalog.relation("customers");
}

std::int32_t code(const EncodedColumn& col, const std::string& v) { return *col.dictionary->code_of(v); }

}  // namespace

TEST(Factor, MarginalFromToyCounts) {
  const auto& nat = customers().column("nationality");
  const auto m = marginal_from_counts(nat, "nationality");
  EXPECT_DOUBLE_EQ(m.probs[static_cast<std::size_t>(code(nat, "Swedish"))], 3.0 / 5.0);
  EXPECT_DOUBLE_EQ(m.probs[static_cast<std::size_t>(code(nat, "American"))], 2.0 / 5.0);
  EXPECT_EQ(m.probs[static_cast<std::size_t>(nat.null_code())], 0.0);
  EXPECT_TRUE(is_normalized(m.probs));

  const std::vector<std::int32_t> constant(9, 0);
  EXPECT_EQ(marginal_from_counts(constant, 1).probs, std::vector<double>{1.0});
  EXPECT_THROW(marginal_from_counts(std::vector<std::int32_t>{}, 2), DataError);
}

TEST(Factor, ConditionalFromToyCounts) {
  const auto& nat = customers().column("nationality");
  const auto& hair = customers().column("hair");
  const auto cpt = cpt_from_counts(hair, nat, "hair", "nationality");
  EXPECT_DOUBLE_EQ(cpt.at(code(nat, "Swedish"), code(hair, "Blond")), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(cpt.at(code(nat, "American"), code(hair, "Blond")), 1.0 / 2.0);
  EXPECT_TRUE(is_normalized(cpt));
  // null parent code never occurs: its row falls back to the child's marginal
  EXPECT_FALSE(cpt.supported(nat.null_code()));
  EXPECT_DOUBLE_EQ(cpt.at(nat.null_code(), code(hair, "Blond")), 3.0 / 5.0);
  EXPECT_NEAR(cpt.row_sum(nat.null_code()), 1.0, 1e-12);
}

TEST(Factor, IdentityTable) {
  const std::vector<std::int32_t> x{0, 1, 2, 1, 0, 2, 2};
  const auto cpt = cpt_from_counts(x, 3, x, 3);
  for (std::int32_t p = 0; p < 3; ++p) {
    for (std::int32_t c = 0; c < 3; ++c) EXPECT_EQ(cpt.at(p, c), p == c ? 1.0 : 0.0);
  }
}

TEST(Factor, MarginalizeThroughParent) {
  // nationality: American, Japanese, Swedish; hair: Blond, Brown, Dark
  const auto cpt = ConditionalTable::dense("hair", "nationality", 3, 3,
                                           {0.3, 0.4, 0.3, 0.05, 0.1, 0.85, 0.7, 0.2, 0.1});
  EXPECT_NEAR(cpt.row_sum(1), 1.0, 1e-12);
  const Marginal nationality{"nationality", {0.2, 0.5, 0.3}};
  const auto hair = marginalize(cpt, nationality);
  EXPECT_NEAR(hair.probs[0], 0.295, 1e-12);
  EXPECT_TRUE(is_normalized(hair.probs));
  EXPECT_THROW(marginalize(cpt, Marginal{"x", {0.5, 0.5}}), ArgumentError);
}

TEST(Factor, PostJoinMarginalization) {
  // P(hair | nationality) from customers pushed through the post-join
  // nationality distribution (American 1/7, Swedish 6/7).
  const auto& nat = customers().column("nationality");
  const auto& hair = customers().column("hair");
  const auto cpt = cpt_from_counts(hair, nat);
  Marginal joined{"nationality", std::vector<double>(3, 0.0)};
  joined.probs[static_cast<std::size_t>(code(nat, "American"))] = 1.0 / 7.0;
  joined.probs[static_cast<std::size_t>(code(nat, "Swedish"))] = 6.0 / 7.0;
  const auto out = marginalize(cpt, joined);
  EXPECT_NEAR(out.probs[static_cast<std::size_t>(code(hair, "Blond"))], 27.0 / 42.0, 1e-12);
}

TEST(Factor, UniformThroughIdentity) {
  const auto cpt = ConditionalTable::dense("c", "p", 4, 4, {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1});
  const auto out = marginalize(cpt, Marginal{"p", {0.25, 0.25, 0.25, 0.25}});
  for (const double v : out.probs) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Factor, PointProduct) {
  EXPECT_NEAR(point_product(std::vector<double>{2.0 / 3.0, 3.0 / 5.0}), 2.0 / 5.0, 1e-15);
  EXPECT_NEAR(point_product(std::vector<double>{2.0 / 3.0, 6.0 / 7.0}), 4.0 / 7.0, 1e-15);
  EXPECT_EQ(point_product(std::vector<double>{}), 1.0);
}

TEST(Factor, SparseMatchesDense) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> v(0, 4);
  std::vector<std::int32_t> child, parent;
  for (int i = 0; i < 300; ++i) {
    parent.push_back(v(rng));
    child.push_back((parent.back() + v(rng) % 2) % 5);
  }
  const auto dense = cpt_from_counts(child, 5, parent, 6);
  // rebuild as CSR
  std::vector<std::uint32_t> offsets{0};
  std::vector<std::int32_t> cols;
  std::vector<double> vals;
  for (std::int32_t p = 0; p < 6; ++p) {
    if (dense.supported(p)) {
      for (std::int32_t c = 0; c < 5; ++c) {
        if (dense.at(p, c) != 0.0) {
          cols.push_back(c);
          vals.push_back(dense.at(p, c));
        }
      }
    }
    offsets.push_back(static_cast<std::uint32_t>(cols.size()));
  }
  const auto m = marginal_from_counts(child, 5);
  const auto sparse = ConditionalTable::sparse("c", "p", 6, 5, offsets, cols, vals, m.probs);
  std::vector<double> msg{0.1, 0.7, 0.0, 1.0, 0.3}, a(6), b(6);
  dense.message_to_parent(msg, a);
  sparse.message_to_parent(msg, b);
  for (std::size_t p = 0; p < 6; ++p) EXPECT_NEAR(a[p], b[p], 1e-12);
  std::vector<double> prior{0.1, 0.2, 0.3, 0.1, 0.2, 0.1}, fa(5), fb(5);
  dense.push_forward(prior, fa);
  sparse.push_forward(prior, fb);
  for (std::size_t c = 0; c < 5; ++c) EXPECT_NEAR(fa[c], fb[c], 1e-12);
}

TEST(Factor, TotalProbability) {
  // sum_p P(p) * P(c | p) over all c recovers 1 for any learned table
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::uniform_int_distribution<int> a(0, 3), b(0, 4);
    std::vector<std::int32_t> x, y;
    const int n = 1 + trial;
    for (int i = 0; i < n; ++i) {
      x.push_back(a(rng));
      y.push_back(b(rng));
    }
    const auto px = marginal_from_counts(x, 5);
    const auto py = marginalize(cpt_from_counts(y, 6, x, 5), px);
    const auto direct = marginal_from_counts(y, 6);
    for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(py.probs[c], direct.probs[c], 1e-12);
  }
}

TEST(Factor, MarginalMass) {
  const Marginal m{"x", {0.1, 0.2, 0.3, 0.4}};
  EXPECT_NEAR(m.mass(std::vector<std::int32_t>{1, 3}), 0.6, 1e-15);
  EXPECT_EQ(m.mass(std::vector<std::int32_t>{}), 0.0);
}
