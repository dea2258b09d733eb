#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "lbn/catalog.hpp"
#include "lbn/estimate.hpp"
#include "lbn/factor.hpp"

namespace lbn {

/// Join size under uniformity and full FK coverage: prod |R| / prod over
/// join edges of |referenced relation|.
double uniform_join_size(const Catalog& catalog, const Query& query);

/// Attribute-value independence: one marginal per attribute, multiplied.
class AviEstimator : public Estimator {
 public:
  explicit AviEstimator(std::shared_ptr<const Catalog> catalog, EstimateOptions options = {});

  std::string name() const override { return "avi"; }
  Estimate estimate(const Query& query) const override;
  double raw_selectivity(const Query& query) const;
  /// Stored probabilities, in bytes.
  std::size_t model_bytes() const;

 private:
  std::shared_ptr<const Catalog> catalog_;
  EstimateOptions options_;
  std::map<std::pair<std::string, std::string>, Marginal> marginals_;
};

enum class SampleMode { kUniform, kCorrelated };

std::string to_string(SampleMode mode);
SampleMode sample_mode_from_string(const std::string& text);

inline constexpr double kDefaultSampleRate = 0.01;

struct SampleSet {
  double rate = kDefaultSampleRate;
  std::uint64_t seed = 0;
  SampleMode mode = SampleMode::kUniform;
  /// Kept row indices per relation, ascending.
  std::map<std::string, std::vector<std::uint32_t>> rows;

  bool operator==(const SampleSet&) const = default;
};

/// Hash key of a relation in correlated mode: its PK when some relation
/// references it, otherwise its first FK, otherwise its PK.
std::string correlated_key(const Schema& schema, const std::string& relation);

/// FNV-1a over the seed's little-endian bytes followed by the key bytes.
std::uint64_t key_hash(std::uint64_t seed, const std::string& key);

/// Uniform: each row kept independently with probability `rate`.
/// Correlated: a row is kept iff the hash of its key value falls below
/// rate * 2^64, so rows sharing a key value are kept together.
SampleSet draw_samples(const Catalog& catalog, double rate, std::uint64_t seed, SampleMode mode);

void save_samples(const SampleSet& samples, const std::filesystem::path& dir);
SampleSet load_samples(const std::filesystem::path& dir);

/// Runs the query exactly on the sample and scales up by the inclusion
/// probability of a sampled join tuple.
class SamplingEstimator : public Estimator {
 public:
  SamplingEstimator(std::shared_ptr<const Catalog> catalog, SampleSet samples, EstimateOptions options = {});

  std::string name() const override { return samples_.mode == SampleMode::kUniform ? "sampling" : "correlated"; }
  Estimate estimate(const Query& query) const override;
  /// Probability that a given join tuple of the query survives sampling.
  double inclusion_probability(const Query& query) const;
  const Catalog& sample() const { return sample_; }
  const SampleSet& samples() const { return samples_; }
  std::size_t sample_rows() const;

 private:
  std::shared_ptr<const Catalog> catalog_;
  SampleSet samples_;
  EstimateOptions options_;
  Catalog sample_;
};

}  // namespace lbn
