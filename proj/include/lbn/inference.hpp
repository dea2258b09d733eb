#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "lbn/estimate.hpp"
#include "lbn/factor.hpp"
#include "lbn/linker.hpp"
#include "lbn/query.hpp"

namespace lbn {

struct StitchedNode {
  std::string relation;
  std::string name;
  int parent = -1;
  std::int32_t domain_size = 0;
  /// Roots only.
  std::vector<double> prior;
  /// Non-roots only: P(node | parent).
  std::shared_ptr<const ConditionalTable> cpt;
  /// Allowed codes as a 0/1 mask over the domain; empty means unobserved.
  std::vector<char> evidence;
  /// This node's marginal under the stitched model when known up front
  /// (nodes of a component's top network); used to re-root after pruning.
  /// Not owned: points into the model, which must outlive the tree.
  const std::vector<double>* marginal = nullptr;
};

/// A forest of tree-shaped factors. Parents always precede their children.
struct StitchedTree {
  std::vector<StitchedNode> nodes;
  /// Nodes that must not take the null code for the join to hold.
  std::vector<int> null_guards;

  std::vector<int> roots() const;
  int find(const std::string& relation, const std::string& name) const;
  /// Throws InternalError unless parents precede children and factors are shaped consistently.
  void check() const;
};

/// The relations of the query, as listed.
std::vector<std::string> extract_relations(const Query& query);

/// Links that carry information for this query: for each queried child, the
/// first (canonical order) queried FK edge into it that shares attributes.
std::vector<const Link*> governing_links(const LinkedModel& model, const Query& query);

/// Unrolls the queried networks into one forest. The child network of each
/// governing link hangs under the parent's imported nodes, which keep their
/// post-join factors; the child's own factors for shared nodes are dropped.
StitchedTree stitch(const LinkedModel& model, const Query& query);

/// Keeps, per component, the smallest subtree spanning the evidence nodes,
/// re-rooted at its top with that node's marginal. Components without
/// evidence are dropped (they sum to one).
StitchedTree prune(const StitchedTree& tree);

/// P(evidence): leaf-to-root sum-product, product over components.
double eliminate(const StitchedTree& tree);

/// Estimated size of the query's join from matched-FK counts.
double join_size(const LinkedModel& model, const Query& query);

class LinkedEstimator : public Estimator {
 public:
  LinkedEstimator(std::shared_ptr<const LinkedModel> model, EstimateOptions options = {}, std::string name = {});

  std::string name() const override { return name_; }
  Estimate estimate(const Query& query) const override;
  /// Unclamped P(evidence | all queried joins hold).
  double raw_selectivity(const Query& query) const;
  const LinkedModel& model() const { return *model_; }

 private:
  std::shared_ptr<const LinkedModel> model_;
  EstimateOptions options_;
  std::string name_;
};

}  // namespace lbn
