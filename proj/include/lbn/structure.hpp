#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lbn/catalog.hpp"
#include "lbn/factor.hpp"

namespace lbn {

/// A column view used while learning structure: name plus codes.
struct NamedColumn {
  std::string name;
  const EncodedColumn* column = nullptr;
};

struct WeightedEdge {
  int a = 0;
  int b = 0;
  double weight = 0.0;  // mutual information, nats
};

struct WeightedGraph {
  std::vector<std::string> nodes;
  std::vector<WeightedEdge> edges;

  double weight(int a, int b) const;
};

/// Mutual information in nats. Symmetric bit-for-bit: the pair is put in a
/// canonical order before summation.
double mutual_information(std::span<const std::int32_t> x, std::int32_t x_size, std::span<const std::int32_t> y,
                          std::int32_t y_size);
double mutual_information(const EncodedColumn& x, const EncodedColumn& y);

/// Complete MI graph over `columns`, one edge per unordered pair (a < b), in
/// lexicographic pair order. Pairs are evaluated in parallel with OpenMP.
WeightedGraph build_mi_graph(std::span<const NamedColumn> columns);
/// Serial reference implementation of build_mi_graph; results are identical.
WeightedGraph build_mi_graph_serial(std::span<const NamedColumn> columns);
/// MI graph over the modeled attributes of a relation.
WeightedGraph build_mi_graph(const RelationData& relation);

/// Kruskal on edges sorted by (weight desc, name pair asc). When `core` is
/// given, edges with both ends in the core are taken first, so the result is
/// the heaviest spanning tree whose restriction to the core is the core's own
/// maximum spanning tree.
std::vector<WeightedEdge> maximum_spanning_tree(const WeightedGraph& graph, std::span<const bool> core = {});

/// Node with the largest sum of incident tree-edge weights; ties go to the
/// lower node index (declaration order).
int choose_root(std::span<const WeightedEdge> tree, const WeightedGraph& graph);

/// Tree-shaped Bayesian network over the attributes of one relation.
struct TreeBN {
  std::string relation;
  std::vector<std::string> nodes;
  int root = -1;
  std::vector<int> parent;          // -1 at the root
  std::vector<double> edge_weight;  // MI of the edge to the parent, 0 at the root
  Marginal root_marginal;
  std::vector<std::shared_ptr<const ConditionalTable>> cpts;  // null at the root
  std::vector<std::int32_t> domain_sizes;

  std::size_t size() const { return nodes.size(); }
  int index_of(const std::string& name) const;
  std::vector<std::vector<int>> children() const;
  /// Nodes in breadth-first order from the root.
  std::vector<int> bfs_order() const;
  /// Marginal of every node implied by the network.
  std::vector<std::vector<double>> node_marginals() const;
  /// Structural check: one root, single tree, factors shaped consistently.
  void check() const;
};

/// Fits marginal and CPTs for a fixed undirected tree oriented from `root`.
TreeBN fit_tree(std::string relation, std::span<const NamedColumn> columns, std::span<const WeightedEdge> tree,
                int root);

/// Chow-Liu tree: MI graph, maximum spanning tree, weighted-degree root,
/// breadth-first orientation, CPTs from counts. `core` as in
/// maximum_spanning_tree. Each (node, anchor) pair in `fixed` takes no part
/// in the search; the node is joined to its anchor afterwards.
TreeBN build_bn(std::string relation, std::span<const NamedColumn> columns, std::span<const bool> core = {},
                std::span<const std::pair<int, int>> fixed = {});
TreeBN build_bn(const RelationData& relation);

/// Log-likelihood of the columns' rows under the network (nats).
double log_likelihood(const TreeBN& bn, std::span<const NamedColumn> columns);

}  // namespace lbn
