#include "lbn/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <map>
#include <set>

#include "lbn/error.hpp"

namespace lbn {

double clamp_selectivity(double selectivity, double join_size, const EstimateOptions& options) {
  double s = std::clamp(selectivity, 0.0, 1.0);
  if (options.clamp && join_size > 0.0) s = std::max(s, std::min(1.0, 1.0 / (2.0 * join_size)));
  return s;
}

std::vector<int> StitchedTree::roots() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].parent < 0) out.push_back(static_cast<int>(i));
  }
  return out;
}

int StitchedTree::find(const std::string& relation, const std::string& name) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].relation == relation && nodes[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

void StitchedTree::check() const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    const auto d = static_cast<std::size_t>(n.domain_size);
    if (n.parent >= static_cast<int>(i)) throw InternalError("stitched tree: parent after child at '" + n.name + "'");
    if (!n.evidence.empty() && n.evidence.size() != d) throw InternalError("stitched tree: evidence size mismatch");
    if (n.parent < 0) {
      if (n.prior.size() != d) throw InternalError("stitched tree: root '" + n.name + "' has no prior");
    } else {
      const auto& p = nodes[static_cast<std::size_t>(n.parent)];
      if (!n.cpt || n.cpt->child_size() != n.domain_size || n.cpt->parent_size() != p.domain_size) {
        throw InternalError("stitched tree: table of '" + n.name + "' is misshaped");
      }
    }
  }
}

std::vector<std::string> extract_relations(const Query& query) { return query.relations; }

std::vector<const Link*> governing_links(const LinkedModel& model, const Query& query) {
  auto joins = query.joins;
  std::sort(joins.begin(), joins.end());
  std::set<std::string> governed;
  std::vector<const Link*> out;
  for (const auto& j : joins) {
    const Link* link = model.find_link(j.parent, j.fk);
    if (link == nullptr) throw ModelError("model has no link for '" + j.parent + "." + j.fk + "'");
    if (link->shared.empty() || governed.count(link->child)) continue;
    governed.insert(link->child);
    out.push_back(link);
  }
  return out;
}

namespace {

void restrict_evidence(std::vector<char>& evidence, const std::vector<char>& mask) {
  if (evidence.empty()) {
    evidence = mask;
    return;
  }
  for (std::size_t c = 0; c < mask.size(); ++c) evidence[c] = static_cast<char>(evidence[c] && mask[c]);
}


// The stitched forest as indices into the model. Deciding what a query
// touches happens here, before any factor is copied.
struct Skeleton {
  struct Slot {
    const Network* net = nullptr;
    int node = -1;
    int parent = -1;
    bool top = false;  // node of a component's top network
  };
  std::vector<Slot> slots;
  std::vector<std::vector<char>> evidence;
  std::vector<int> null_guards;
};

Skeleton make_skeleton(const LinkedModel& model, const Query& query) {
  const auto governing = governing_links(model, query);
  std::set<std::string> governed;
  std::map<std::string, std::vector<const Link*>> below;
  for (const auto* l : governing) {
    governed.insert(l->child);
    below[l->parent].push_back(l);
  }

  Skeleton sk;
  std::size_t total = 0;
  for (const auto& r : query.relations) total += model.network(r).bn.size();
  sk.slots.reserve(total);
  std::map<std::string, std::vector<int>> ids;  // relation -> network node -> slot
  auto add_network = [&](const std::string& relation, const Link* via) {
    const auto& net = model.network(relation);
    const auto& bn = net.bn;
    auto& map = ids[relation];
    map.assign(bn.size(), -1);
    if (via != nullptr) {
      const auto& parent_bn = model.network(via->parent).bn;
      for (const auto& [child_node, parent_node] : via->shared) {
        map[static_cast<std::size_t>(bn.index_of(child_node))] =
            ids.at(via->parent)[static_cast<std::size_t>(parent_bn.index_of(parent_node))];
      }
    }
    for (const int v : net.order) {
      const auto i = static_cast<std::size_t>(v);
      if (map[i] >= 0) continue;
      Skeleton::Slot s{&net, v, -1, via == nullptr};
      if (v == bn.root) {
        if (via != nullptr) throw InternalError("link into '" + relation + "' does not share its root");
      } else {
        s.parent = map[static_cast<std::size_t>(bn.parent[i])];
      }
      map[i] = static_cast<int>(sk.slots.size());
      sk.slots.push_back(s);
    }
  };

  auto relations = query.relations;
  std::sort(relations.begin(), relations.end());
  for (const auto& top : relations) {
    if (governed.count(top)) continue;
    std::deque<std::pair<std::string, const Link*>> pending{{top, nullptr}};
    while (!pending.empty()) {
      const auto [relation, via] = pending.front();
      pending.pop_front();
      add_network(relation, via);
      for (const auto* l : below[relation]) pending.emplace_back(l->child, l);
    }
  }
  if (ids.size() != relations.size()) throw InternalError("stitching did not reach every queried relation");

  sk.evidence.resize(sk.slots.size());
  auto lookup = [&model](const std::string& r, const std::string& a) -> const Dictionary& {
    return model.dictionary(r, a);
  };
  for (const auto& [key, codes] : collect_evidence(query, lookup)) {
    const auto& [relation, attribute] = key;
    const auto& bn = model.network(relation).bn;
    const int v = bn.index_of(attribute);
    if (v < 0) throw ModelError("network '" + relation + "' has no node '" + attribute + "'");
    const auto slot = static_cast<std::size_t>(ids.at(relation)[static_cast<std::size_t>(v)]);
    std::vector<char> mask(static_cast<std::size_t>(bn.domain_sizes[static_cast<std::size_t>(v)]), 0);
    for (const auto c : codes) mask[static_cast<std::size_t>(c)] = 1;
    restrict_evidence(sk.evidence[slot], mask);
  }

  for (const auto& j : query.joins) {
    const auto* link = model.find_link(j.parent, j.fk);
    if (link->shared.empty() || model.join_card(j.parent, j.fk) >= model.row_count(j.parent)) continue;
    const int v = model.network(j.parent).bn.index_of(link->shared.front().second);
    sk.null_guards.push_back(ids.at(j.parent)[static_cast<std::size_t>(v)]);
  }
  std::sort(sk.null_guards.begin(), sk.null_guards.end());
  sk.null_guards.erase(std::unique(sk.null_guards.begin(), sk.null_guards.end()), sk.null_guards.end());
  return sk;
}

std::int32_t domain_of(const Skeleton::Slot& s) { return s.net->bn.domain_sizes[static_cast<std::size_t>(s.node)]; }

StitchedNode make_node(const Skeleton::Slot& s) {
  const auto& bn = s.net->bn;
  const auto i = static_cast<std::size_t>(s.node);
  StitchedNode node;
  node.relation = bn.relation;
  node.name = bn.nodes[i];
  node.domain_size = bn.domain_sizes[i];
  node.parent = s.parent;
  if (s.parent < 0) {
    node.prior = bn.root_marginal.probs;
  } else {
    node.cpt = bn.cpts[i];
  }
  if (s.top) node.marginal = &s.net->marginals[i];
  return node;
}

// Which nodes survive pruning and which of them become roots. Nodes are
// given parent-first; `parent_of(i)` and `observed(i)` describe node i.
struct PrunePlan {
  std::vector<char> keep;
  std::vector<char> root;
};

template <class ParentOf, class Observed>
PrunePlan plan_prune(std::size_t n, ParentOf parent_of, Observed observed) {
  std::vector<int> below(n, 0);
  std::vector<int> first_child(n, -1), next_sibling(n, -1);
  for (std::size_t i = n; i-- > 0;) {
    if (observed(i)) ++below[i];
    if (const int p = parent_of(i); p >= 0) {
      below[static_cast<std::size_t>(p)] += below[i];
      next_sibling[i] = first_child[static_cast<std::size_t>(p)];
      first_child[static_cast<std::size_t>(p)] = static_cast<int>(i);
    }
  }
  PrunePlan plan{std::vector<char>(n, 0), std::vector<char>(n, 0)};
  std::vector<int> stack;
  for (std::size_t r = 0; r < n; ++r) {
    if (parent_of(r) >= 0 || below[r] == 0) continue;
    const int total = below[r];
    auto top = static_cast<int>(r);
    // walk down while a single child holds all the evidence
    while (!observed(static_cast<std::size_t>(top))) {
      int next = -1;
      for (int c = first_child[static_cast<std::size_t>(top)]; c >= 0; c = next_sibling[static_cast<std::size_t>(c)]) {
        if (below[static_cast<std::size_t>(c)] == total) next = c;
      }
      if (next < 0) break;
      top = next;
    }
    plan.root[static_cast<std::size_t>(top)] = 1;
    stack.assign(1, top);
    while (!stack.empty()) {
      const auto v = static_cast<std::size_t>(stack.back());
      stack.pop_back();
      plan.keep[v] = 1;
      for (int c = first_child[v]; c >= 0; c = next_sibling[static_cast<std::size_t>(c)]) {
        if (below[static_cast<std::size_t>(c)] > 0) stack.push_back(c);
      }
    }
  }
  return plan;
}

// Marginal of node v: pushed forward from the nearest ancestor whose
// marginal is known, or from the root's prior.
template <class ParentOf, class KnownMarginal, class Prior, class Table>
std::vector<double> marginal_of(int v, ParentOf parent_of, KnownMarginal known, Prior prior, Table table) {
  std::vector<int> path;
  int u = v;
  while (known(u) == nullptr && parent_of(u) >= 0) {
    path.push_back(u);
    u = parent_of(u);
  }
  std::vector<double> current = known(u) != nullptr ? *known(u) : prior(u);
  std::vector<double> next;
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    const auto& cpt = table(*it);
    next.assign(static_cast<std::size_t>(cpt.child_size()), 0.0);
    cpt.push_forward(current, next);
    current.swap(next);
  }
  return current;
}

// prune(stitch(...)) with `evidence` in place of the skeleton's own, built
// without materializing the dropped nodes.
StitchedTree pruned(const Skeleton& sk, const std::vector<std::vector<char>>& evidence) {
  const auto n = sk.slots.size();
  auto parent_of = [&](auto i) { return sk.slots[static_cast<std::size_t>(i)].parent; };
  const auto plan = plan_prune(n, parent_of, [&](std::size_t i) { return !evidence[i].empty(); });
  StitchedTree out;
  std::vector<int> new_id(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (!plan.keep[i]) continue;
    const auto& s = sk.slots[i];
    StitchedNode node = make_node(s);
    node.evidence = evidence[i];
    if (plan.root[i]) {
      if (node.parent >= 0) {
        node.prior = marginal_of(
            static_cast<int>(i), parent_of,
            [&](int u) -> const std::vector<double>* {
              const auto& t = sk.slots[static_cast<std::size_t>(u)];
              return t.top ? &t.net->marginals[static_cast<std::size_t>(t.node)] : nullptr;
            },
            [&](int u) { return sk.slots[static_cast<std::size_t>(u)].net->bn.root_marginal.probs; },
            [&](int u) -> const ConditionalTable& {
              const auto& t = sk.slots[static_cast<std::size_t>(u)];
              return *t.net->bn.cpts[static_cast<std::size_t>(t.node)];
            });
        node.cpt.reset();
        node.parent = -1;
      }
      node.marginal = nullptr;
    } else {
      node.parent = new_id[static_cast<std::size_t>(node.parent)];
    }
    new_id[i] = static_cast<int>(out.nodes.size());
    out.nodes.push_back(std::move(node));
  }
  for (const int g : sk.null_guards) {
    if (new_id[static_cast<std::size_t>(g)] >= 0) out.null_guards.push_back(new_id[static_cast<std::size_t>(g)]);
  }
  return out;
}

std::vector<char> not_null_mask(std::int32_t domain) {
  std::vector<char> mask(static_cast<std::size_t>(domain), 1);
  if (!mask.empty()) mask.back() = 0;
  return mask;
}

}  // namespace

StitchedTree stitch(const LinkedModel& model, const Query& query) {
  const auto sk = make_skeleton(model, query);
  StitchedTree tree;
  tree.nodes.reserve(sk.slots.size());
  for (std::size_t i = 0; i < sk.slots.size(); ++i) {
    tree.nodes.push_back(make_node(sk.slots[i]));
    tree.nodes.back().evidence = sk.evidence[i];
  }
  tree.null_guards = sk.null_guards;
  tree.check();
  return tree;
}

StitchedTree prune(const StitchedTree& tree) {
  const auto n = tree.nodes.size();
  auto parent_of = [&](auto i) { return tree.nodes[static_cast<std::size_t>(i)].parent; };
  const auto plan = plan_prune(n, parent_of, [&](std::size_t i) { return !tree.nodes[i].evidence.empty(); });

  StitchedTree out;
  std::vector<int> new_id(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (!plan.keep[i]) continue;
    StitchedNode node = tree.nodes[i];
    if (plan.root[i]) {
      if (node.parent >= 0) {
        node.prior = marginal_of(
            static_cast<int>(i), parent_of,
            [&](int u) { return tree.nodes[static_cast<std::size_t>(u)].marginal; },
            [&](int u) { return tree.nodes[static_cast<std::size_t>(u)].prior; },
            [&](int u) -> const ConditionalTable& { return *tree.nodes[static_cast<std::size_t>(u)].cpt; });
        node.cpt.reset();
        node.parent = -1;
      }
      node.marginal = nullptr;
    } else {
      node.parent = new_id[static_cast<std::size_t>(node.parent)];
    }
    new_id[i] = static_cast<int>(out.nodes.size());
    out.nodes.push_back(std::move(node));
  }
  for (const int g : tree.null_guards) {
    if (new_id[static_cast<std::size_t>(g)] >= 0) out.null_guards.push_back(new_id[static_cast<std::size_t>(g)]);
  }
  return out;
}

double eliminate(const StitchedTree& tree) {
  const auto n = tree.nodes.size();
  std::vector<char> active(n, 0);
  for (std::size_t i = n; i-- > 0;) {
    const auto& node = tree.nodes[i];
    if (!node.evidence.empty()) active[i] = 1;
    if (active[i] && node.parent >= 0) active[static_cast<std::size_t>(node.parent)] = 1;
  }
  std::vector<std::vector<double>> messages(n);
  auto message = [&](std::size_t v) -> std::vector<double>& {
    auto& m = messages[v];
    if (m.empty()) m.assign(static_cast<std::size_t>(tree.nodes[v].domain_size), 1.0);
    return m;
  };
  double result = 1.0;
  std::vector<double> up;
  for (std::size_t i = n; i-- > 0;) {
    if (!active[i]) continue;
    const auto& node = tree.nodes[i];
    auto& m = message(i);
    if (!node.evidence.empty()) {
      for (std::size_t c = 0; c < m.size(); ++c) {
        if (!node.evidence[c]) m[c] = 0.0;
      }
    }
    if (node.parent < 0) {
      double total = 0.0;
      for (std::size_t c = 0; c < m.size(); ++c) total += node.prior[c] * m[c];
      result *= total;
    } else {
      auto& pm = message(static_cast<std::size_t>(node.parent));
      up.assign(pm.size(), 0.0);
      node.cpt->message_to_parent(m, up);
      for (std::size_t p = 0; p < pm.size(); ++p) pm[p] *= up[p];
    }
    std::vector<double>().swap(messages[i]);
  }
  return result;
}

double join_size(const LinkedModel& model, const Query& query) {
  if (query.joins.empty()) return static_cast<double>(model.row_count(query.relations.front()));
  std::map<std::string, int> degree;
  double size = 1.0;
  for (const auto& j : query.joins) {
    const auto* link = model.find_link(j.parent, j.fk);
    if (link == nullptr) throw ModelError("model has no link for '" + j.parent + "." + j.fk + "'");
    size *= static_cast<double>(model.join_card(j.parent, j.fk));
    ++degree[j.parent];
    ++degree[link->child];
  }
  for (const auto& [relation, d] : degree) {
    if (d > 1) size /= std::pow(static_cast<double>(model.row_count(relation)), d - 1);
  }
  return size;
}

// ---------------------------------------------------------------------------

LinkedEstimator::LinkedEstimator(std::shared_ptr<const LinkedModel> model, EstimateOptions options, std::string name)
    : model_(std::move(model)), options_(options), name_(std::move(name)) {
  if (!model_) throw ArgumentError("LinkedEstimator needs a model");
  if (name_.empty()) name_ = "k" + std::to_string(model_->k);
}

double LinkedEstimator::raw_selectivity(const Query& query) const {
  const auto sk = make_skeleton(*model_, query);
  if (sk.null_guards.empty()) return eliminate(pruned(sk, sk.evidence));

  auto numerator = sk.evidence;
  std::vector<std::vector<char>> denominator(sk.slots.size());
  for (const int g : sk.null_guards) {
    const auto i = static_cast<std::size_t>(g);
    const auto not_null = not_null_mask(domain_of(sk.slots[i]));
    restrict_evidence(numerator[i], not_null);
    restrict_evidence(denominator[i], not_null);
  }
  const double den = eliminate(pruned(sk, denominator));
  if (den <= 0.0) return 0.0;
  return std::min(1.0, eliminate(pruned(sk, numerator)) / den);
}

Estimate LinkedEstimator::estimate(const Query& query) const {
  const auto start = std::chrono::steady_clock::now();
  Estimate e;
  e.method = name_;
  const double size = join_size(*model_, query);
  e.selectivity = clamp_selectivity(raw_selectivity(query), size, options_);
  e.cardinality = e.selectivity * size;
  e.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return e;
}

}  // namespace lbn
