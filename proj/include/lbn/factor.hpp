#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lbn/catalog.hpp"

namespace lbn {

/// Tables with more cells than this are stored sparsely.
inline constexpr std::size_t kDenseCellLimit = std::size_t{4096} * 4096;

/// One-way distribution over the codes of an attribute (null code included).
struct Marginal {
  std::string attribute;
  std::vector<double> probs;

  double mass(std::span<const std::int32_t> codes) const;
  bool operator==(const Marginal&) const = default;
};

/// P(child | parent) as a [parent code][child code] table.
///
/// Parent codes never observed in the training data have no support; their
/// row holds the child's marginal so that every row sums to one and summing
/// a barren child out of a tree is exact.
class ConditionalTable {
 public:
  ConditionalTable() = default;

  /// Dense table from row-major probabilities.
  static ConditionalTable dense(std::string child, std::string parent, std::int32_t parent_size,
                                std::int32_t child_size, std::vector<double> probs,
                                std::vector<bool> supported = {});

  /// Sparse table in CSR layout; rows with no entries fall back to `fallback`.
  static ConditionalTable sparse(std::string child, std::string parent, std::int32_t parent_size,
                                 std::int32_t child_size, std::vector<std::uint32_t> row_offsets,
                                 std::vector<std::int32_t> cols, std::vector<double> vals,
                                 std::vector<double> fallback);

  const std::string& child() const { return child_; }
  const std::string& parent() const { return parent_; }
  std::int32_t parent_size() const { return parent_size_; }
  std::int32_t child_size() const { return child_size_; }
  bool is_dense() const { return dense_; }
  bool supported(std::int32_t parent_code) const { return supported_[static_cast<std::size_t>(parent_code)]; }

  double at(std::int32_t parent_code, std::int32_t child_code) const;

  /// Calls f(child_code, prob) for each nonzero entry of the row.
  template <class F>
  void for_each_in_row(std::int32_t p, F&& f) const {
    if (dense_) {
      const double* row = dense_probs_.data() + static_cast<std::size_t>(p) * static_cast<std::size_t>(child_size_);
      for (std::int32_t c = 0; c < child_size_; ++c) {
        if (row[c] != 0.0) f(c, row[c]);
      }
      return;
    }
    const auto begin = row_offsets_[static_cast<std::size_t>(p)];
    const auto end = row_offsets_[static_cast<std::size_t>(p) + 1];
    if (begin == end) {
      for (std::int32_t c = 0; c < child_size_; ++c) {
        if (fallback_[static_cast<std::size_t>(c)] != 0.0) f(c, fallback_[static_cast<std::size_t>(c)]);
      }
      return;
    }
    for (auto i = begin; i < end; ++i) f(cols_[i], vals_[i]);
  }

  /// out[p] = sum_c P(c | p) * child_values[c].
  void message_to_parent(std::span<const double> child_values, std::span<double> out) const;
  /// out[c] = sum_p parent_probs[p] * P(c | p).
  void push_forward(std::span<const double> parent_probs, std::span<double> out) const;

  double row_sum(std::int32_t parent_code) const;
  std::size_t stored_cells() const { return dense_ ? dense_probs_.size() : vals_.size(); }

  // Raw storage, used by serialization.
  const std::vector<double>& dense_probs() const { return dense_probs_; }
  const std::vector<bool>& support() const { return supported_; }
  const std::vector<std::uint32_t>& row_offsets() const { return row_offsets_; }
  const std::vector<std::int32_t>& cols() const { return cols_; }
  const std::vector<double>& vals() const { return vals_; }
  const std::vector<double>& fallback() const { return fallback_; }

  bool operator==(const ConditionalTable&) const = default;

 private:
  std::string child_;
  std::string parent_;
  std::int32_t parent_size_ = 0;
  std::int32_t child_size_ = 0;
  bool dense_ = true;
  std::vector<bool> supported_;
  std::vector<double> dense_probs_;
  std::vector<std::uint32_t> row_offsets_;
  std::vector<std::int32_t> cols_;
  std::vector<double> vals_;
  std::vector<double> fallback_;
};

/// probs[c] = count(c) / n over a code column with `domain_size` codes.
Marginal marginal_from_counts(std::span<const std::int32_t> codes, std::int32_t domain_size,
                              std::string attribute = {});
Marginal marginal_from_counts(const EncodedColumn& column, std::string attribute = {});

/// probs[p][c] = count(p, c) / count(p) for observed parent codes.
ConditionalTable cpt_from_counts(std::span<const std::int32_t> child, std::int32_t child_size,
                                 std::span<const std::int32_t> parent, std::int32_t parent_size,
                                 std::string child_name = {}, std::string parent_name = {});
ConditionalTable cpt_from_counts(const EncodedColumn& child, const EncodedColumn& parent,
                                 std::string child_name = {}, std::string parent_name = {});

/// out[c] = sum_p cpt[p][c] * parent[p].
Marginal marginalize(const ConditionalTable& cpt, const Marginal& parent_marginal);

/// Plain product of probabilities; the empty product is 1.
double point_product(std::span<const double> terms);

/// Every entry >= 0 and the total within `tolerance` of 1.
bool is_normalized(std::span<const double> probs, double tolerance = 1e-9);
/// Every supported row normalized.
bool is_normalized(const ConditionalTable& cpt, double tolerance = 1e-9);

}  // namespace lbn
