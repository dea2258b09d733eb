#pragma once

#include <cstdint>
#include <string>

namespace lbn::test {

/// Outcome of one randomized suite. Each case draws fresh inputs from
/// `seed + case index`, so a failure message is enough to replay it.
struct PropertyReport {
  std::string name;
  int cases = 0;
  int failures = 0;
  std::string first_failure;

  bool ok() const { return failures == 0 && cases > 0; }
  void fail(int case_index, const std::string& message);
};

// factor tables built from counts and learned models sum to one
PropertyReport prop_normalization(std::uint64_t seed, int cases);
// q >= 1, symmetric, scale-free
PropertyReport prop_q_error(std::uint64_t seed, int cases);
// one more conjunct never raises an estimate or the true count
PropertyReport prop_monotonicity(std::uint64_t seed, int cases);
// k=0 estimate = product of per-relation estimates
PropertyReport prop_k0_factorization(std::uint64_t seed, int cases);
// single-relation queries give the same estimate for every k
PropertyReport prop_k_invariance(std::uint64_t seed, int cases);
// deserialize(serialize(m)) == m and estimates agree bit for bit
PropertyReport prop_round_trip(std::uint64_t seed, int cases);
// adding "attr IN (every value)" on a null-free attribute changes nothing
PropertyReport prop_in_domain_invariance(std::uint64_t seed, int cases);
// oracle from every starting relation = naive materialization
PropertyReport prop_oracle_vs_naive(std::uint64_t seed, int cases);
// rate-1 samples in both modes reproduce the oracle
PropertyReport prop_full_sampling(std::uint64_t seed, int cases);
// MI symmetric bit for bit; OpenMP MI graph = serial MI graph
PropertyReport prop_mi(std::uint64_t seed, int cases);
// stitched-tree elimination = joint enumeration, also after pruning
PropertyReport prop_elimination(std::uint64_t seed, int cases);

}  // namespace lbn::test
