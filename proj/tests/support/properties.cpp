#include "properties.hpp"

#include <cmath>
#include <exception>
#include <memory>
#include <random>
#include <sstream>

#include "brute.hpp"
#include "lbn/baselines.hpp"
#include "lbn/factor.hpp"
#include "lbn/inference.hpp"
#include "lbn/linker.hpp"
#include "lbn/oracle.hpp"
#include "lbn/structure.hpp"
#include "lbn/workload.hpp"
#include "synth.hpp"

namespace lbn::test {

void PropertyReport::fail(int case_index, const std::string& message) {
  if (failures++ == 0) first_failure = "case " + std::to_string(case_index) + ": " + message;
}

namespace {

bool close(double a, double b, double rel, double abs = 1e-12) {
  return std::abs(a - b) <= abs + rel * std::max(std::abs(a), std::abs(b));
}

std::string str(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::shared_ptr<const LinkedModel> linked(const Catalog& catalog, int k) {
  LinkOptions o;
  o.k = k;
  return std::make_shared<const LinkedModel>(build_linked(catalog, o));
}

double raw(const std::shared_ptr<const LinkedModel>& model, const Query& q) {
  return LinkedEstimator(model, {false}).raw_selectivity(q);
}

// Runs body(case_index, rng) for each case, turning exceptions into failures.
template <class Body>
PropertyReport run(const std::string& name, std::uint64_t seed, int cases, Body&& body) {
  PropertyReport report;
  report.name = name;
  for (int i = 0; i < cases; ++i) {
    Rng rng(seed + static_cast<std::uint64_t>(i));
    ++report.cases;
    try {
      body(i, rng, report);
    } catch (const std::exception& e) {
      report.fail(i, std::string("exception: ") + e.what());
    }
  }
  return report;
}

std::vector<std::int32_t> random_codes(Rng& rng, std::size_t n, int domain) {
  std::vector<std::int32_t> out(n);
  std::uniform_int_distribution<int> d(0, domain - 1);
  for (auto& c : out) c = d(rng);
  return out;
}

}  // namespace

PropertyReport prop_normalization(std::uint64_t seed, int cases) {
  return run("normalization", seed, cases, [](int i, Rng& rng, PropertyReport& r) {
    // counts
    const auto n = std::uniform_int_distribution<std::size_t>(1, 200)(rng);
    const int dx = std::uniform_int_distribution<int>(1, 7)(rng);
    const int dy = std::uniform_int_distribution<int>(1, 7)(rng);
    const auto x = random_codes(rng, n, dx);
    auto y = random_codes(rng, n, dy);
    for (std::size_t k = 0; k < n; ++k) {
      if (std::bernoulli_distribution(0.5)(rng)) y[k] = x[k] % dy;
    }
    const auto mx = marginal_from_counts(x, dx);
    const auto my = marginal_from_counts(y, dy);
    const auto cpt = cpt_from_counts(x, dx, y, dy);
    if (!is_normalized(mx.probs) || !is_normalized(my.probs)) r.fail(i, "marginal not normalized");
    if (!is_normalized(cpt)) r.fail(i, "cpt row not normalized");
    const auto total = marginalize(cpt, my);
    for (int c = 0; c < dx; ++c) {
      if (!close(total.probs[static_cast<std::size_t>(c)], mx.probs[static_cast<std::size_t>(c)], 0, 1e-9)) {
        r.fail(i, "law of total probability");
        break;
      }
    }

    // learned models
    const auto catalog = random_db(rng()).catalog();
    for (int k = 0; k <= 2; ++k) {
      const auto model = linked(catalog, k);
      for (const auto& [name, net] : model->networks) {
        if (!is_normalized(net.bn.root_marginal.probs)) r.fail(i, name + " root marginal");
        for (const auto& t : net.bn.cpts) {
          if (t && !is_normalized(*t)) r.fail(i, name + " cpt " + t->child());
        }
        for (const auto& m : net.marginals) {
          if (!is_normalized(m)) r.fail(i, name + " node marginal");
        }
      }
    }
  });
}

PropertyReport prop_q_error(std::uint64_t seed, int cases) {
  return run("q-error", seed, cases, [](int i, Rng& rng, PropertyReport& r) {
    std::uniform_real_distribution<double> exp10(-6.0, 6.0);
    const double a = std::pow(10.0, exp10(rng));
    const double b = std::bernoulli_distribution(0.1)(rng) ? a : std::pow(10.0, exp10(rng));
    const double c = std::pow(10.0, exp10(rng));
    const double q = q_error(a, b);
    if (!(q >= 1.0)) r.fail(i, "q < 1: " + str(q));
    if (q != q_error(b, a)) r.fail(i, "asymmetric");
    if (!close(q_error(c * a, c * b), q, 1e-12, 0)) r.fail(i, "not scale invariant");
    if (a == b && q != 1.0) r.fail(i, "q(a, a) != 1");
    if (cardinality_q_error(a, b) < 1.0) r.fail(i, "cardinality q < 1");
  });
}

PropertyReport prop_monotonicity(std::uint64_t seed, int cases) {
  return run("monotonicity", seed, cases, [](int i, Rng& rng, PropertyReport& r) {
    auto db = std::make_shared<const Catalog>(random_db(rng()).catalog());
    QueryShape shape;
    shape.max_predicates = 4;
    Query more = random_query(*db, rng, shape);
    if (more.predicates.empty()) return;
    Query fewer = more;
    fewer.predicates.erase(fewer.predicates.begin() +
                           std::uniform_int_distribution<long>(0, static_cast<long>(fewer.predicates.size()) - 1)(rng));
    for (int k = 0; k <= 2; ++k) {
      const auto model = linked(*db, k);
      const double a = raw(model, more);
      const double b = raw(model, fewer);
      if (a > b + 1e-12) r.fail(i, "k" + std::to_string(k) + ": " + str(a) + " > " + str(b));
      if (a < 0.0 || b > 1.0 + 1e-12) r.fail(i, "k" + std::to_string(k) + " outside [0, 1]");
    }
    AviEstimator avi(db);
    if (avi.raw_selectivity(more) > avi.raw_selectivity(fewer) + 1e-12) r.fail(i, "avi increased");
    if (exact(*db, more).qualifying > exact(*db, fewer).qualifying) r.fail(i, "oracle increased");
  });
}

PropertyReport prop_k0_factorization(std::uint64_t seed, int cases) {
  return run("k0 factorization", seed, cases, [](int i, Rng& rng, PropertyReport& r) {
    const auto catalog = random_db(rng()).catalog();
    const auto model = linked(catalog, 0);
    const Query q = random_query(catalog, rng);
    double product = 1.0;
    for (const auto& rel : q.relations) {
      Query single;
      single.relations = {rel};
      for (const auto& p : q.predicates) {
        if (p.relation == rel) single.predicates.push_back(p);
      }
      product *= raw(model, single);
    }
    const double whole = raw(model, q);
    if (!close(whole, product, 1e-12)) r.fail(i, str(whole) + " vs product " + str(product));
  });
}

PropertyReport prop_k_invariance(std::uint64_t seed, int cases) {
  return run("single-relation k-invariance", seed, cases, [](int i, Rng& rng, PropertyReport& r) {
    const auto catalog = random_db(rng()).catalog();
    QueryShape shape;
    shape.max_relations = 1;
    shape.max_predicates = 3;
    const Query q = random_query(catalog, rng, shape);
    const double base = raw(linked(catalog, 0), q);
    for (int k = 1; k <= 3; ++k) {
      const double other = raw(linked(catalog, k), q);
      if (!close(base, other, 1e-9)) r.fail(i, "k" + std::to_string(k) + " " + str(other) + " vs k0 " + str(base));
    }
  });
}

PropertyReport prop_round_trip(std::uint64_t seed, int cases) {
  return run("serialization round-trip", seed, cases, [](int i, Rng& rng, PropertyReport& r) {
    const auto catalog = random_db(rng()).catalog();
    const int k = std::uniform_int_distribution<int>(0, 3)(rng);
    const auto model = linked(catalog, k);
    const auto text = serialize_model(*model);
    const auto back = std::make_shared<const LinkedModel>(deserialize_model(text));
    if (!(*back == *model)) r.fail(i, "model differs after round trip");
    if (serialize_model(*back) != text) r.fail(i, "second serialization differs");
    for (int n = 0; n < 5; ++n) {
      const Query q = random_query(catalog, rng);
      if (raw(model, q) != raw(back, q)) r.fail(i, "estimate differs after round trip");
    }
  });
}

PropertyReport prop_in_domain_invariance(std::uint64_t seed, int cases) {
  return run("IN entire domain", seed, cases, [](int i, Rng& rng, PropertyReport& r) {
    const auto catalog = random_db(rng()).catalog();
    const Query q = random_query(catalog, rng);
    // a categorical attribute of a queried relation with no nulls
    std::vector<Predicate> candidates;
    for (const auto& rel : q.relations) {
      const auto& data = catalog.relation(rel);
      for (const auto& name : data.attribute_order) {
        const auto& col = data.column(name);
        if (col.dictionary->kind() != AttributeKind::kCategorical || col.dictionary->size() == 0) continue;
        bool has_null = false;
        for (const auto c : col.codes) has_null |= c == col.null_code();
        if (has_null) continue;
        Predicate p;
        p.relation = rel;
        p.attribute = name;
        p.op = PredicateOp::kIn;
        p.values = col.dictionary->values();
        candidates.push_back(std::move(p));
      }
    }
    if (candidates.empty()) return;
    Query wider = q;
    wider.predicates.push_back(candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)]);
    wider = wider.canonical();
    for (int k = 0; k <= 2; ++k) {
      const auto model = linked(catalog, k);
      const double a = raw(model, q);
      const double b = raw(model, wider);
      if (!close(a, b, 0, 1e-9)) r.fail(i, "k" + std::to_string(k) + " " + str(a) + " vs " + str(b));
    }
  });
}

PropertyReport prop_oracle_vs_naive(std::uint64_t seed, int cases) {
  return run("oracle vs naive join", seed, cases, [](int i, Rng& rng, PropertyReport& r) {
    const auto catalog = random_db(rng()).catalog();
    const Query q = random_query(catalog, rng);
    const auto naive = naive_join(catalog, q);
    for (const auto& root : q.relations) {
      OracleOptions o;
      o.root = root;
      const auto t = exact(catalog, q, o);
      if (t.join_size != naive.join || t.qualifying != naive.qualifying) {
        r.fail(i, "root " + root + ": oracle " + std::to_string(t.qualifying) + "/" + std::to_string(t.join_size) +
                      " naive " + std::to_string(naive.qualifying) + "/" + std::to_string(naive.join));
      }
    }
  });
}

PropertyReport prop_full_sampling(std::uint64_t seed, int cases) {
  return run("rate-1 sampling = oracle", seed, cases, [](int i, Rng& rng, PropertyReport& r) {
    auto catalog = std::make_shared<const Catalog>(random_db(rng()).catalog());
    const Query q = random_query(*catalog, rng);
    const auto truth = exact(*catalog, q);
    for (const auto mode : {SampleMode::kUniform, SampleMode::kCorrelated}) {
      SamplingEstimator s(catalog, draw_samples(*catalog, 1.0, rng(), mode), {false});
      const auto e = s.estimate(q);
      if (truth.join_size == 0) {
        if (!e.degenerate) r.fail(i, "empty join not flagged");
        continue;
      }
      if (e.selectivity != truth.selectivity || e.cardinality != static_cast<double>(truth.qualifying)) {
        r.fail(i, to_string(mode) + ": " + str(e.cardinality) + " vs " + std::to_string(truth.qualifying));
      }
    }
  });
}

PropertyReport prop_mi(std::uint64_t seed, int cases) {
  return run("mutual information", seed, cases, [](int i, Rng& rng, PropertyReport& r) {
    const auto n = std::uniform_int_distribution<std::size_t>(1, 300)(rng);
    const int cols = std::uniform_int_distribution<int>(1, 6)(rng);
    std::vector<EncodedColumn> data;
    for (int c = 0; c < cols; ++c) {
      const int d = std::uniform_int_distribution<int>(1, 8)(rng);
      std::vector<std::string> values;
      for (int v = 0; v < d; ++v) values.push_back("v" + std::to_string(v));
      EncodedColumn col;
      col.dictionary = std::make_shared<Dictionary>(AttributeKind::kCategorical, values);
      col.codes = random_codes(rng, n, d + 1);  // null code included
      if (c > 0) {
        for (std::size_t k = 0; k < n; ++k) {
          if (std::bernoulli_distribution(0.4)(rng)) col.codes[k] = data.back().codes[k] % (d + 1);
        }
      }
      data.push_back(std::move(col));
    }
    std::vector<NamedColumn> named;
    for (int c = 0; c < cols; ++c) named.push_back({"c" + std::to_string(c), &data[static_cast<std::size_t>(c)]});
    for (int a = 0; a < cols; ++a) {
      for (int b = 0; b < cols; ++b) {
        const double ab = mutual_information(data[static_cast<std::size_t>(a)], data[static_cast<std::size_t>(b)]);
        const double ba = mutual_information(data[static_cast<std::size_t>(b)], data[static_cast<std::size_t>(a)]);
        if (ab != ba) r.fail(i, "MI not symmetric");
        if (ab < 0.0) r.fail(i, "negative MI");
      }
    }
    const auto par = build_mi_graph(named);
    const auto ser = build_mi_graph_serial(named);
    if (par.nodes != ser.nodes || par.edges.size() != ser.edges.size()) {
      r.fail(i, "graph shape differs");
      return;
    }
    for (std::size_t e = 0; e < par.edges.size(); ++e) {
      if (par.edges[e].a != ser.edges[e].a || par.edges[e].b != ser.edges[e].b ||
          par.edges[e].weight != ser.edges[e].weight) {
        r.fail(i, "parallel and serial weights differ");
      }
    }
  });
}

PropertyReport prop_elimination(std::uint64_t seed, int cases) {
  return run("variable elimination", seed, cases, [](int i, Rng& rng, PropertyReport& r) {
    auto tree = random_stitched_tree(rng);
    tree.check();
    const double truth = brute_probability(tree);
    const double ve = eliminate(tree);
    if (!close(ve, truth, 0, 1e-12)) r.fail(i, "eliminate " + str(ve) + " vs enumeration " + str(truth));
    // known marginals on a random subset, then prune
    const auto marg = brute_marginals(tree);
    for (std::size_t n = 0; n < tree.nodes.size(); ++n) {
      if (std::bernoulli_distribution(0.5)(rng)) tree.nodes[n].marginal = &marg[n];
    }
    const auto pruned = prune(tree);
    pruned.check();
    const double vp = eliminate(pruned);
    if (!close(vp, truth, 0, 1e-12)) r.fail(i, "pruned " + str(vp) + " vs enumeration " + str(truth));
  });
}

}  // namespace lbn::test
