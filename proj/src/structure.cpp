#include "lbn/structure.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <memory>
#include <numeric>
#include <unordered_map>

#include "lbn/error.hpp"

namespace lbn {

namespace {

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n), rank_(n, 0) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<int> rank_;
};

double mi_from_ordered(std::span<const std::int32_t> x, std::int32_t x_size, std::span<const std::int32_t> y,
                       std::int32_t y_size) {
  const auto nx = static_cast<std::size_t>(x_size);
  const auto ny = static_cast<std::size_t>(y_size);
  const auto n = static_cast<double>(x.size());
  std::vector<std::uint64_t> cx(nx, 0), cy(ny, 0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    ++cx[static_cast<std::size_t>(x[i])];
    ++cy[static_cast<std::size_t>(y[i])];
  }
  auto term = [&](std::size_t a, std::size_t b, std::uint64_t count) {
    const double pxy = static_cast<double>(count) / n;
    return pxy * std::log(static_cast<double>(count) * n /
                          (static_cast<double>(cx[a]) * static_cast<double>(cy[b])));
  };
  double total = 0.0;
  if (nx * ny <= kDenseCellLimit) {
    std::vector<std::uint64_t> joint(nx * ny, 0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      ++joint[static_cast<std::size_t>(x[i]) * ny + static_cast<std::size_t>(y[i])];
    }
    for (std::size_t a = 0; a < nx; ++a) {
      for (std::size_t b = 0; b < ny; ++b) {
        const auto count = joint[a * ny + b];
        if (count != 0) total += term(a, b, count);
      }
    }
  } else {
    std::unordered_map<std::uint64_t, std::uint64_t> joint;
    for (std::size_t i = 0; i < x.size(); ++i) {
      ++joint[static_cast<std::uint64_t>(x[i]) * ny + static_cast<std::uint64_t>(y[i])];
    }
    std::vector<std::pair<std::uint64_t, std::uint64_t>> cells(joint.begin(), joint.end());
    std::sort(cells.begin(), cells.end());
    for (const auto& [key, count] : cells) total += term(key / ny, key % ny, count);
  }
  return std::max(total, 0.0);
}

std::vector<std::pair<int, int>> all_pairs(std::size_t n) {
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) pairs.emplace_back(static_cast<int>(a), static_cast<int>(b));
  }
  return pairs;
}

void check_columns(std::span<const NamedColumn> columns) {
  for (const auto& c : columns) {
    if (c.column == nullptr) throw ArgumentError("null column '" + c.name + "'");
    if (c.column->size() != columns.front().column->size()) {
      throw ArgumentError("columns differ in length ('" + c.name + "')");
    }
  }
}

}  // namespace

double WeightedGraph::weight(int a, int b) const {
  for (const auto& e : edges) {
    if ((e.a == a && e.b == b) || (e.a == b && e.b == a)) return e.weight;
  }
  throw ArgumentError("no edge between the given nodes");
}

double mutual_information(std::span<const std::int32_t> x, std::int32_t x_size, std::span<const std::int32_t> y,
                          std::int32_t y_size) {
  if (x.size() != y.size()) throw ArgumentError("mutual_information: columns differ in length");
  if (x.empty()) throw DataError("mutual_information: empty columns");
  const bool swap = x_size > y_size ||
                    (x_size == y_size && std::lexicographical_compare(y.begin(), y.end(), x.begin(), x.end()));
  return swap ? mi_from_ordered(y, y_size, x, x_size) : mi_from_ordered(x, x_size, y, y_size);
}

double mutual_information(const EncodedColumn& x, const EncodedColumn& y) {
  return mutual_information(x.codes, x.domain_size(), y.codes, y.domain_size());
}

WeightedGraph build_mi_graph_serial(std::span<const NamedColumn> columns) {
  check_columns(columns);
  WeightedGraph graph;
  for (const auto& c : columns) graph.nodes.push_back(c.name);
  for (const auto& [a, b] : all_pairs(columns.size())) {
    graph.edges.push_back({a, b, mutual_information(*columns[static_cast<std::size_t>(a)].column,
                                                    *columns[static_cast<std::size_t>(b)].column)});
  }
  return graph;
}

WeightedGraph build_mi_graph(std::span<const NamedColumn> columns) {
  check_columns(columns);
  WeightedGraph graph;
  for (const auto& c : columns) graph.nodes.push_back(c.name);
  const auto pairs = all_pairs(columns.size());
  graph.edges.resize(pairs.size());
  const auto count = static_cast<std::int64_t>(pairs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < count; ++i) {
    const auto [a, b] = pairs[static_cast<std::size_t>(i)];
    graph.edges[static_cast<std::size_t>(i)] = {
        a, b,
        mutual_information(*columns[static_cast<std::size_t>(a)].column,
                           *columns[static_cast<std::size_t>(b)].column)};
  }
  return graph;
}

namespace {

std::vector<NamedColumn> modeled_columns(const RelationData& relation) {
  std::vector<NamedColumn> columns;
  for (const auto& name : relation.attribute_order) columns.push_back({name, &relation.column(name)});
  return columns;
}

}  // namespace

WeightedGraph build_mi_graph(const RelationData& relation) {
  if (relation.row_count == 0) throw DataError("relation '" + relation.name + "' is empty");
  const auto columns = modeled_columns(relation);
  return build_mi_graph(std::span<const NamedColumn>(columns));
}

std::vector<WeightedEdge> maximum_spanning_tree(const WeightedGraph& graph, std::span<const bool> core) {
  if (graph.nodes.empty()) throw ArgumentError("maximum_spanning_tree: empty graph");
  auto in_core = [&](const WeightedEdge& e) {
    return !core.empty() && core[static_cast<std::size_t>(e.a)] && core[static_cast<std::size_t>(e.b)];
  };
  auto name_pair = [&](const WeightedEdge& e) {
    const auto& x = graph.nodes[static_cast<std::size_t>(e.a)];
    const auto& y = graph.nodes[static_cast<std::size_t>(e.b)];
    return x < y ? std::make_pair(x, y) : std::make_pair(y, x);
  };
  std::vector<WeightedEdge> edges = graph.edges;
  std::stable_sort(edges.begin(), edges.end(), [&](const WeightedEdge& l, const WeightedEdge& r) {
    const bool lc = in_core(l), rc = in_core(r);
    if (lc != rc) return lc;
    if (l.weight != r.weight) return l.weight > r.weight;
    return name_pair(l) < name_pair(r);
  });
  DisjointSet sets(graph.nodes.size());
  std::vector<WeightedEdge> tree;
  for (const auto& e : edges) {
    if (sets.unite(static_cast<std::size_t>(e.a), static_cast<std::size_t>(e.b))) tree.push_back(e);
    if (tree.size() + 1 == graph.nodes.size()) break;
  }
  if (tree.size() + 1 != graph.nodes.size()) throw ArgumentError("maximum_spanning_tree: graph is not connected");
  return tree;
}

int choose_root(std::span<const WeightedEdge> tree, const WeightedGraph& graph) {
  if (graph.nodes.empty()) throw ArgumentError("choose_root: empty graph");
  std::vector<double> degree(graph.nodes.size(), 0.0);
  for (const auto& e : tree) {
    degree[static_cast<std::size_t>(e.a)] += e.weight;
    degree[static_cast<std::size_t>(e.b)] += e.weight;
  }
  int best = 0;
  for (std::size_t i = 1; i < degree.size(); ++i) {
    const double scale = std::max({1.0, std::abs(degree[i]), std::abs(degree[static_cast<std::size_t>(best)])});
    if (degree[i] - degree[static_cast<std::size_t>(best)] > 1e-12 * scale) best = static_cast<int>(i);
  }
  return best;
}

// ---------------------------------------------------------------------------
// TreeBN

int TreeBN::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i] == name) return static_cast<int>(i);
  }
  return -1;
}

std::vector<std::vector<int>> TreeBN::children() const {
  std::vector<std::vector<int>> out(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (parent[i] >= 0) out[static_cast<std::size_t>(parent[i])].push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<int> TreeBN::bfs_order() const {
  std::vector<int> order;
  if (root < 0) return order;
  const auto kids = children();
  order.push_back(root);
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (const int c : kids[static_cast<std::size_t>(order[i])]) order.push_back(c);
  }
  return order;
}

std::vector<std::vector<double>> TreeBN::node_marginals() const {
  std::vector<std::vector<double>> out(nodes.size());
  for (const int v : bfs_order()) {
    const auto i = static_cast<std::size_t>(v);
    if (v == root) {
      out[i] = root_marginal.probs;
    } else {
      out[i].assign(static_cast<std::size_t>(domain_sizes[i]), 0.0);
      cpts[i]->push_forward(out[static_cast<std::size_t>(parent[i])], out[i]);
    }
  }
  return out;
}

void TreeBN::check() const {
  const auto n = nodes.size();
  if (parent.size() != n || cpts.size() != n || domain_sizes.size() != n || edge_weight.size() != n) {
    throw InternalError("network '" + relation + "': inconsistent array sizes");
  }
  if (n == 0) {
    if (root != -1) throw InternalError("network '" + relation + "': root set on empty network");
    return;
  }
  if (root < 0 || static_cast<std::size_t>(root) >= n || parent[static_cast<std::size_t>(root)] != -1) {
    throw InternalError("network '" + relation + "': bad root");
  }
  if (bfs_order().size() != n) throw InternalError("network '" + relation + "': parent map is not a single tree");
  if (root_marginal.probs.size() != static_cast<std::size_t>(domain_sizes[static_cast<std::size_t>(root)])) {
    throw InternalError("network '" + relation + "': root marginal has the wrong size");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (static_cast<int>(i) == root) {
      if (cpts[i]) throw InternalError("network '" + relation + "': root carries a conditional table");
      continue;
    }
    const auto& cpt = cpts[i];
    if (!cpt || cpt->child_size() != domain_sizes[i] ||
        cpt->parent_size() != domain_sizes[static_cast<std::size_t>(parent[i])]) {
      throw InternalError("network '" + relation + "': table of '" + nodes[i] + "' is missing or misshaped");
    }
  }
}

TreeBN fit_tree(std::string relation, std::span<const NamedColumn> columns, std::span<const WeightedEdge> tree,
                int root) {
  check_columns(columns);
  TreeBN bn;
  bn.relation = std::move(relation);
  const auto n = columns.size();
  if (n == 0) return bn;
  if (tree.size() + 1 != n) throw ArgumentError("fit_tree: edge count does not span the columns");
  for (const auto& c : columns) {
    bn.nodes.push_back(c.name);
    bn.domain_sizes.push_back(c.column->domain_size());
  }
  bn.root = root;
  bn.parent.assign(n, -1);
  bn.edge_weight.assign(n, 0.0);
  bn.cpts.assign(n, nullptr);

  std::vector<std::vector<std::pair<int, double>>> adjacency(n);
  for (const auto& e : tree) {
    adjacency[static_cast<std::size_t>(e.a)].emplace_back(e.b, e.weight);
    adjacency[static_cast<std::size_t>(e.b)].emplace_back(e.a, e.weight);
  }
  std::vector<bool> seen(n, false);
  std::deque<int> frontier{root};
  seen[static_cast<std::size_t>(root)] = true;
  std::size_t visited = 0;
  while (!frontier.empty()) {
    const int v = frontier.front();
    frontier.pop_front();
    ++visited;
    for (const auto& [w, weight] : adjacency[static_cast<std::size_t>(v)]) {
      if (seen[static_cast<std::size_t>(w)]) continue;
      seen[static_cast<std::size_t>(w)] = true;
      bn.parent[static_cast<std::size_t>(w)] = v;
      bn.edge_weight[static_cast<std::size_t>(w)] = weight;
      frontier.push_back(w);
    }
  }
  if (visited != n) throw ArgumentError("fit_tree: edges do not form a spanning tree");

  const auto& root_column = *columns[static_cast<std::size_t>(root)].column;
  bn.root_marginal = marginal_from_counts(root_column, bn.nodes[static_cast<std::size_t>(root)]);
  for (std::size_t i = 0; i < n; ++i) {
    if (bn.parent[i] < 0) continue;
    const auto p = static_cast<std::size_t>(bn.parent[i]);
    bn.cpts[i] = std::make_shared<const ConditionalTable>(
        cpt_from_counts(*columns[i].column, *columns[p].column, bn.nodes[i], bn.nodes[p]));
  }
  return bn;
}

TreeBN build_bn(std::string relation, std::span<const NamedColumn> columns, std::span<const bool> core,
                std::span<const std::pair<int, int>> fixed) {
  check_columns(columns);
  if (!columns.empty() && columns.front().column->size() == 0) {
    throw DataError("cannot build a network for empty relation '" + relation + "'");
  }
  if (columns.empty()) {
    TreeBN bn;
    bn.relation = std::move(relation);
    return bn;
  }
  if (!core.empty() && core.size() != columns.size()) throw ArgumentError("build_bn: core mask length mismatch");

  // structure search only over nodes without a fixed anchor
  std::vector<char> is_fixed(columns.size(), 0);
  for (const auto& [node, anchor] : fixed) {
    if (node < 0 || anchor < 0 || static_cast<std::size_t>(node) >= columns.size() ||
        static_cast<std::size_t>(anchor) >= columns.size() || node == anchor || is_fixed[static_cast<std::size_t>(node)]) {
      throw ArgumentError("build_bn: bad fixed edge");
    }
    is_fixed[static_cast<std::size_t>(node)] = 1;
  }
  std::vector<int> searched;
  std::vector<NamedColumn> search_columns;
  std::unique_ptr<bool[]> search_core(new bool[columns.size()]);
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (is_fixed[i]) continue;
    search_core[searched.size()] = core.empty() || core[i];
    searched.push_back(static_cast<int>(i));
    search_columns.push_back(columns[i]);
  }
  if (searched.empty()) throw ArgumentError("build_bn: every node is anchored");
  const auto graph = build_mi_graph(std::span<const NamedColumn>(search_columns));
  const auto sub_tree = searched.size() > 1
                            ? maximum_spanning_tree(graph, core.empty() ? std::span<const bool>{}
                                                                        : std::span<const bool>(search_core.get(), searched.size()))
                            : std::vector<WeightedEdge>{};

  std::vector<WeightedEdge> tree;
  for (const auto& e : sub_tree) {
    tree.push_back({searched[static_cast<std::size_t>(e.a)], searched[static_cast<std::size_t>(e.b)], e.weight});
  }
  for (const auto& [node, anchor] : fixed) {
    tree.push_back({node, anchor,
                    mutual_information(*columns[static_cast<std::size_t>(node)].column,
                                       *columns[static_cast<std::size_t>(anchor)].column)});
  }
  WeightedGraph full;
  for (const auto& c : columns) full.nodes.push_back(c.name);
  const int root = choose_root(tree, full);
  return fit_tree(std::move(relation), columns, tree, root);
}

TreeBN build_bn(const RelationData& relation) {
  if (relation.row_count == 0) throw DataError("cannot build a network for empty relation '" + relation.name + "'");
  const auto columns = modeled_columns(relation);
  return build_bn(relation.name, std::span<const NamedColumn>(columns));
}

double log_likelihood(const TreeBN& bn, std::span<const NamedColumn> columns) {
  check_columns(columns);
  if (columns.empty()) return 0.0;
  std::vector<const EncodedColumn*> by_node(bn.size(), nullptr);
  for (std::size_t i = 0; i < bn.size(); ++i) {
    for (const auto& c : columns) {
      if (c.name == bn.nodes[i]) by_node[i] = c.column;
    }
    if (by_node[i] == nullptr) throw ArgumentError("log_likelihood: no column for node '" + bn.nodes[i] + "'");
  }
  const std::size_t rows = columns.front().column->size();
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < bn.size(); ++i) {
      const auto code = by_node[i]->codes[r];
      const double p = static_cast<int>(i) == bn.root
                           ? bn.root_marginal.probs[static_cast<std::size_t>(code)]
                           : bn.cpts[i]->at(by_node[static_cast<std::size_t>(bn.parent[i])]->codes[r], code);
      total += std::log(p);
    }
  }
  return total;
}

}  // namespace lbn
