#include "lbn/factor.hpp"

#include <cmath>
#include <numeric>
#include <unordered_map>

#include "lbn/error.hpp"

namespace lbn {

double Marginal::mass(std::span<const std::int32_t> codes) const {
  double total = 0.0;
  for (const auto c : codes) total += probs[static_cast<std::size_t>(c)];
  return total;
}

ConditionalTable ConditionalTable::dense(std::string child, std::string parent, std::int32_t parent_size,
                                         std::int32_t child_size, std::vector<double> probs,
                                         std::vector<bool> supported) {
  if (probs.size() != static_cast<std::size_t>(parent_size) * static_cast<std::size_t>(child_size)) {
    throw ArgumentError("conditional table shape does not match its probabilities");
  }
  ConditionalTable t;
  t.child_ = std::move(child);
  t.parent_ = std::move(parent);
  t.parent_size_ = parent_size;
  t.child_size_ = child_size;
  t.dense_ = true;
  t.dense_probs_ = std::move(probs);
  t.supported_ = supported.empty() ? std::vector<bool>(static_cast<std::size_t>(parent_size), true)
                                   : std::move(supported);
  if (t.supported_.size() != static_cast<std::size_t>(parent_size)) {
    throw ArgumentError("support mask length does not match parent size");
  }
  return t;
}

ConditionalTable ConditionalTable::sparse(std::string child, std::string parent, std::int32_t parent_size,
                                          std::int32_t child_size, std::vector<std::uint32_t> row_offsets,
                                          std::vector<std::int32_t> cols, std::vector<double> vals,
                                          std::vector<double> fallback) {
  if (row_offsets.size() != static_cast<std::size_t>(parent_size) + 1 || cols.size() != vals.size() ||
      row_offsets.back() != cols.size() || fallback.size() != static_cast<std::size_t>(child_size)) {
    throw ArgumentError("malformed sparse conditional table");
  }
  ConditionalTable t;
  t.child_ = std::move(child);
  t.parent_ = std::move(parent);
  t.parent_size_ = parent_size;
  t.child_size_ = child_size;
  t.dense_ = false;
  t.supported_.resize(static_cast<std::size_t>(parent_size));
  for (std::size_t p = 0; p < t.supported_.size(); ++p) t.supported_[p] = row_offsets[p + 1] > row_offsets[p];
  t.row_offsets_ = std::move(row_offsets);
  t.cols_ = std::move(cols);
  t.vals_ = std::move(vals);
  t.fallback_ = std::move(fallback);
  return t;
}

double ConditionalTable::at(std::int32_t p, std::int32_t c) const {
  if (dense_) {
    return dense_probs_[static_cast<std::size_t>(p) * static_cast<std::size_t>(child_size_) +
                        static_cast<std::size_t>(c)];
  }
  const auto begin = row_offsets_[static_cast<std::size_t>(p)];
  const auto end = row_offsets_[static_cast<std::size_t>(p) + 1];
  if (begin == end) return fallback_[static_cast<std::size_t>(c)];
  for (auto i = begin; i < end; ++i) {
    if (cols_[i] == c) return vals_[i];
  }
  return 0.0;
}

void ConditionalTable::message_to_parent(std::span<const double> child_values, std::span<double> out) const {
  if (dense_) {
    const auto n = static_cast<std::size_t>(child_size_);
    for (std::int32_t p = 0; p < parent_size_; ++p) {
      const double* row = dense_probs_.data() + static_cast<std::size_t>(p) * n;
      double acc = 0.0;
      for (std::size_t c = 0; c < n; ++c) acc += row[c] * child_values[c];
      out[static_cast<std::size_t>(p)] = acc;
    }
    return;
  }
  double fallback_value = 0.0;
  for (std::size_t c = 0; c < fallback_.size(); ++c) fallback_value += fallback_[c] * child_values[c];
  for (std::int32_t p = 0; p < parent_size_; ++p) {
    const auto begin = row_offsets_[static_cast<std::size_t>(p)];
    const auto end = row_offsets_[static_cast<std::size_t>(p) + 1];
    if (begin == end) {
      out[static_cast<std::size_t>(p)] = fallback_value;
      continue;
    }
    double acc = 0.0;
    for (auto i = begin; i < end; ++i) acc += vals_[i] * child_values[static_cast<std::size_t>(cols_[i])];
    out[static_cast<std::size_t>(p)] = acc;
  }
}

void ConditionalTable::push_forward(std::span<const double> parent_probs, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::int32_t p = 0; p < parent_size_; ++p) {
    const double w = parent_probs[static_cast<std::size_t>(p)];
    if (w == 0.0) continue;
    for_each_in_row(p, [&](std::int32_t c, double prob) { out[static_cast<std::size_t>(c)] += w * prob; });
  }
}

double ConditionalTable::row_sum(std::int32_t p) const {
  double total = 0.0;
  for_each_in_row(p, [&](std::int32_t, double prob) { total += prob; });
  return total;
}

Marginal marginal_from_counts(std::span<const std::int32_t> codes, std::int32_t domain_size, std::string attribute) {
  if (codes.empty()) throw DataError("cannot build a marginal from an empty column");
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(domain_size), 0);
  for (const auto c : codes) ++counts[static_cast<std::size_t>(c)];
  Marginal m{std::move(attribute), std::vector<double>(counts.size())};
  const auto n = static_cast<double>(codes.size());
  for (std::size_t i = 0; i < counts.size(); ++i) m.probs[i] = static_cast<double>(counts[i]) / n;
  return m;
}

Marginal marginal_from_counts(const EncodedColumn& column, std::string attribute) {
  return marginal_from_counts(column.codes, column.domain_size(), std::move(attribute));
}

ConditionalTable cpt_from_counts(std::span<const std::int32_t> child, std::int32_t child_size,
                                 std::span<const std::int32_t> parent, std::int32_t parent_size,
                                 std::string child_name, std::string parent_name) {
  if (child.size() != parent.size()) throw ArgumentError("child and parent columns differ in length");
  if (child.empty()) throw DataError("cannot fit a conditional table on empty columns");
  const auto np = static_cast<std::size_t>(parent_size);
  const auto nc = static_cast<std::size_t>(child_size);

  std::vector<std::uint64_t> child_counts(nc, 0);
  std::vector<std::uint64_t> parent_counts(np, 0);
  for (std::size_t i = 0; i < child.size(); ++i) {
    ++child_counts[static_cast<std::size_t>(child[i])];
    ++parent_counts[static_cast<std::size_t>(parent[i])];
  }
  std::vector<double> fallback(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    fallback[c] = static_cast<double>(child_counts[c]) / static_cast<double>(child.size());
  }

  if (np * nc <= kDenseCellLimit) {
    std::vector<std::uint64_t> counts(np * nc, 0);
    for (std::size_t i = 0; i < child.size(); ++i) {
      ++counts[static_cast<std::size_t>(parent[i]) * nc + static_cast<std::size_t>(child[i])];
    }
    std::vector<double> probs(np * nc, 0.0);
    std::vector<bool> supported(np, false);
    for (std::size_t p = 0; p < np; ++p) {
      if (parent_counts[p] == 0) {
        std::copy(fallback.begin(), fallback.end(), probs.begin() + static_cast<std::ptrdiff_t>(p * nc));
        continue;
      }
      supported[p] = true;
      const auto denom = static_cast<double>(parent_counts[p]);
      for (std::size_t c = 0; c < nc; ++c) probs[p * nc + c] = static_cast<double>(counts[p * nc + c]) / denom;
    }
    return ConditionalTable::dense(std::move(child_name), std::move(parent_name), parent_size, child_size,
                                   std::move(probs), std::move(supported));
  }

  std::unordered_map<std::uint64_t, std::uint64_t> pair_counts;
  for (std::size_t i = 0; i < child.size(); ++i) {
    ++pair_counts[static_cast<std::uint64_t>(parent[i]) * nc + static_cast<std::uint64_t>(child[i])];
  }
  std::vector<std::vector<std::pair<std::int32_t, std::uint64_t>>> rows(np);
  for (const auto& [key, count] : pair_counts) {
    rows[key / nc].emplace_back(static_cast<std::int32_t>(key % nc), count);
  }
  std::vector<std::uint32_t> offsets(np + 1, 0);
  std::vector<std::int32_t> cols;
  std::vector<double> vals;
  cols.reserve(pair_counts.size());
  vals.reserve(pair_counts.size());
  for (std::size_t p = 0; p < np; ++p) {
    auto& row = rows[p];
    std::sort(row.begin(), row.end());
    for (const auto& [c, count] : row) {
      cols.push_back(c);
      vals.push_back(static_cast<double>(count) / static_cast<double>(parent_counts[p]));
    }
    offsets[p + 1] = static_cast<std::uint32_t>(cols.size());
  }
  return ConditionalTable::sparse(std::move(child_name), std::move(parent_name), parent_size, child_size,
                                  std::move(offsets), std::move(cols), std::move(vals), std::move(fallback));
}

ConditionalTable cpt_from_counts(const EncodedColumn& child, const EncodedColumn& parent, std::string child_name,
                                 std::string parent_name) {
  return cpt_from_counts(child.codes, child.domain_size(), parent.codes, parent.domain_size(), std::move(child_name),
                         std::move(parent_name));
}

Marginal marginalize(const ConditionalTable& cpt, const Marginal& parent_marginal) {
  if (parent_marginal.probs.size() != static_cast<std::size_t>(cpt.parent_size())) {
    throw ArgumentError("parent marginal has " + std::to_string(parent_marginal.probs.size()) +
                        " entries, table expects " + std::to_string(cpt.parent_size()));
  }
  Marginal out{cpt.child(), std::vector<double>(static_cast<std::size_t>(cpt.child_size()), 0.0)};
  cpt.push_forward(parent_marginal.probs, out.probs);
  const double total = std::accumulate(out.probs.begin(), out.probs.end(), 0.0);
  if (total > 0.0 && std::abs(total - 1.0) > 0.0) {
    for (auto& p : out.probs) p /= total;
  }
  return out;
}

double point_product(std::span<const double> terms) {
  double product = 1.0;
  for (const double t : terms) product *= t;
  return product;
}

bool is_normalized(std::span<const double> probs, double tolerance) {
  double total = 0.0;
  for (const double p : probs) {
    if (!(p >= 0.0)) return false;
    total += p;
  }
  return std::abs(total - 1.0) <= tolerance;
}

bool is_normalized(const ConditionalTable& cpt, double tolerance) {
  for (std::int32_t p = 0; p < cpt.parent_size(); ++p) {
    if (!cpt.supported(p)) continue;
    bool nonnegative = true;
    cpt.for_each_in_row(p, [&](std::int32_t, double prob) { nonnegative = nonnegative && prob >= 0.0; });
    if (!nonnegative || std::abs(cpt.row_sum(p) - 1.0) > tolerance) return false;
  }
  return true;
}

}  // namespace lbn
