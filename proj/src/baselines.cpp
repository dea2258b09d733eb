#include "lbn/baselines.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "json.hpp"
#include "lbn/error.hpp"
#include "lbn/hash.hpp"
#include "lbn/oracle.hpp"
#include "lbn/query.hpp"

namespace lbn {

using nlohmann::json;

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

double uniform_join_size(const Catalog& catalog, const Query& query) {
  double size = 1.0;
  for (const auto& r : query.relations) size *= static_cast<double>(catalog.relation(r).row_count);
  for (const auto& j : query.joins) {
    size /= static_cast<double>(catalog.relation(join_child(j, catalog.schema)).row_count);
  }
  return size;
}

// ---------------------------------------------------------------------------
// AVI

AviEstimator::AviEstimator(std::shared_ptr<const Catalog> catalog, EstimateOptions options)
    : catalog_(std::move(catalog)), options_(options) {
  for (const auto& [name, data] : catalog_->relations) {
    for (const auto& attribute : data.attribute_order) {
      marginals_.emplace(std::make_pair(name, attribute), marginal_from_counts(data.column(attribute), attribute));
    }
  }
}

std::size_t AviEstimator::model_bytes() const {
  std::size_t bytes = 0;
  for (const auto& [key, m] : marginals_) bytes += m.probs.size() * sizeof(double);
  return bytes;
}

double AviEstimator::raw_selectivity(const Query& query) const {
  double s = 1.0;
  for (const auto& [key, codes] : collect_evidence(query, dictionaries_of(*catalog_))) {
    s *= marginals_.at(key).mass(codes);
  }
  return s;
}

Estimate AviEstimator::estimate(const Query& query) const {
  const auto start = std::chrono::steady_clock::now();
  Estimate e;
  e.method = name();
  const double size = uniform_join_size(*catalog_, query);
  e.selectivity = clamp_selectivity(raw_selectivity(query), size, options_);
  e.cardinality = e.selectivity * size;
  e.elapsed_ms = elapsed_ms(start);
  return e;
}

// ---------------------------------------------------------------------------
// Sampling

std::string to_string(SampleMode mode) { return mode == SampleMode::kUniform ? "uniform" : "correlated"; }

SampleMode sample_mode_from_string(const std::string& text) {
  if (text == "uniform") return SampleMode::kUniform;
  if (text == "correlated") return SampleMode::kCorrelated;
  throw ArgumentError("unknown sample mode '" + text + "'");
}

std::string correlated_key(const Schema& schema, const std::string& relation) {
  for (const auto& r : schema.relations) {
    for (const auto& fk : r.foreign_keys) {
      if (fk.references == relation) return schema.relation(relation).primary_key;
    }
  }
  const auto& decl = schema.relation(relation);
  return decl.foreign_keys.empty() ? decl.primary_key : decl.foreign_keys.front().attribute;
}

std::uint64_t key_hash(std::uint64_t seed, const std::string& key) { return mix64(fnv1a(key, fnv1a_u64(seed))); }

SampleSet draw_samples(const Catalog& catalog, double rate, std::uint64_t seed, SampleMode mode) {
  if (!(rate > 0.0 && rate <= 1.0)) throw ArgumentError("sampling rate must be in (0, 1], got " + std::to_string(rate));
  SampleSet out{rate, seed, mode, {}};
  constexpr double kTwo64 = 18446744073709551616.0;
  for (const auto& [name, data] : catalog.relations) {
    auto& kept = out.rows[name];
    if (rate >= 1.0) {
      kept.resize(data.row_count);
      std::iota(kept.begin(), kept.end(), 0U);
      continue;
    }
    if (mode == SampleMode::kUniform) {
      std::mt19937_64 rng(seed ^ fnv1a(name));
      for (std::size_t r = 0; r < data.row_count; ++r) {
        if (static_cast<double>(rng() >> 11) * 0x1.0p-53 < rate) kept.push_back(static_cast<std::uint32_t>(r));
      }
      continue;
    }
    const auto threshold = static_cast<std::uint64_t>(rate * kTwo64);
    const auto& column = data.key_column(correlated_key(catalog.schema, name));
    // Null keys join nothing; they are kept by a per-row hash instead.
    const auto row_seed = fnv1a(name, fnv1a_u64(seed));
    for (std::size_t r = 0; r < data.row_count; ++r) {
      const auto code = column.codes[r];
      const auto h = code == column.null_code() ? mix64(fnv1a_u64(r, row_seed))
                                                : key_hash(seed, column.dictionary->decode(code));
      if (h < threshold) kept.push_back(static_cast<std::uint32_t>(r));
    }
  }
  return out;
}

void save_samples(const SampleSet& samples, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  json manifest{{"seed", samples.seed}, {"rate", samples.rate}, {"mode", to_string(samples.mode)}};
  json files = json::object();
  for (const auto& [name, rows] : samples.rows) {
    const auto file = name + ".rows.csv";
    std::ofstream out(dir / file);
    if (!out) throw IoError("cannot write sample file '" + (dir / file).string() + "'");
    out << "row\n";
    for (const auto r : rows) out << r << '\n';
    files[name] = file;
  }
  manifest["relations"] = files;
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write sample manifest in '" + dir.string() + "'");
  out << manifest.dump(2) << '\n';
}

SampleSet load_samples(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("cannot read sample manifest in '" + dir.string() + "'");
  SampleSet out;
  try {
    const auto manifest = json::parse(in);
    out.seed = manifest.at("seed").get<std::uint64_t>();
    out.rate = manifest.at("rate").get<double>();
    out.mode = sample_mode_from_string(manifest.at("mode").get<std::string>());
    for (const auto& [name, file] : manifest.at("relations").items()) {
      const auto table = read_csv(dir / file.get<std::string>());
      auto& rows = out.rows[name];
      for (const auto& row : table.rows) rows.push_back(static_cast<std::uint32_t>(std::stoul(row.at(0).value())));
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed sample manifest: ") + e.what());
  } catch (const std::logic_error& e) {
    throw IoError(std::string("malformed sample file: ") + e.what());
  }
  return out;
}

SamplingEstimator::SamplingEstimator(std::shared_ptr<const Catalog> catalog, SampleSet samples,
                                     EstimateOptions options)
    : catalog_(std::move(catalog)), samples_(std::move(samples)), options_(options) {
  sample_.schema = catalog_->schema;
  for (const auto& [name, data] : catalog_->relations) {
    const auto it = samples_.rows.find(name);
    if (it == samples_.rows.end()) throw ArgumentError("sample set has no rows for relation '" + name + "'");
    for (const auto r : it->second) {
      if (r >= data.row_count) throw ArgumentError("sample row out of range for relation '" + name + "'");
    }
    sample_.relations.emplace(name, subset_rows(data, it->second));
  }
}

std::size_t SamplingEstimator::sample_rows() const {
  std::size_t n = 0;
  for (const auto& [name, rows] : samples_.rows) n += rows.size();
  return n;
}

double SamplingEstimator::inclusion_probability(const Query& query) const {
  if (samples_.rate >= 1.0) return 1.0;
  // Relations joined on their hash keys share one retention decision.
  std::map<std::string, std::string> group;
  for (const auto& r : query.relations) group[r] = r;
  auto find = [&](std::string x) {
    while (group[x] != x) x = group[x];
    return x;
  };
  if (samples_.mode == SampleMode::kCorrelated) {
    for (const auto& j : query.joins) {
      const auto& child = join_child(j, catalog_->schema);
      if (correlated_key(catalog_->schema, j.parent) == j.fk &&
          correlated_key(catalog_->schema, child) == catalog_->schema.relation(child).primary_key) {
        group[find(j.parent)] = find(child);
      }
    }
  }
  std::set<std::string> roots;
  for (const auto& r : query.relations) roots.insert(find(r));
  return std::pow(samples_.rate, static_cast<double>(roots.size()));
}

Estimate SamplingEstimator::estimate(const Query& query) const {
  const auto start = std::chrono::steady_clock::now();
  Estimate e;
  e.method = name();
  const auto truth = exact(sample_, query);
  const double inclusion = inclusion_probability(query);
  if (truth.join_size == 0) {
    const double size = uniform_join_size(*catalog_, query);
    e.degenerate = true;
    e.selectivity = clamp_selectivity(0.0, size, options_);
    e.cardinality = e.selectivity * size;
  } else {
    const double size = static_cast<double>(truth.join_size) / inclusion;
    e.selectivity = clamp_selectivity(truth.selectivity, size, options_);
    e.cardinality = e.selectivity * size;
  }
  e.elapsed_ms = elapsed_ms(start);
  return e;
}

}  // namespace lbn
