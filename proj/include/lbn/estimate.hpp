#pragma once

#include <string>

#include "lbn/query.hpp"

namespace lbn {

struct Estimate {
  double selectivity = 0.0;
  double cardinality = 0.0;  // selectivity * join size estimate
  std::string method;
  double elapsed_ms = 0.0;
  /// Set when the estimator had nothing to extrapolate from (empty sampled join).
  bool degenerate = false;
};

struct EstimateOptions {
  /// Floor selectivities at 1 / (2 * join size).
  bool clamp = true;
};

/// Applies the zero floor and caps at one.
double clamp_selectivity(double selectivity, double join_size, const EstimateOptions& options);

class Estimator {
 public:
  virtual ~Estimator() = default;
  virtual std::string name() const = 0;
  /// `query` must already be validated against the estimator's schema.
  virtual Estimate estimate(const Query& query) const = 0;
};

}  // namespace lbn
