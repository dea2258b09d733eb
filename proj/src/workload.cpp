#include "lbn/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json.hpp"
#include "lbn/csv.hpp"
#include "lbn/error.hpp"

namespace lbn {

using nlohmann::json;

WorkloadSpec parse_workload(const std::string& json_text, const Schema& schema) {
  WorkloadSpec spec;
  try {
    const auto j = json::parse(json_text);
    for (const auto& s : j.at("seeds")) spec.seeds.push_back(parse_query(s.dump(), schema));
    if (j.contains("max_joins") && !j["max_joins"].is_null()) spec.max_joins = j["max_joins"].get<int>();
    if (j.contains("cap") && !j["cap"].is_null()) spec.cap = j["cap"].get<std::size_t>();
    spec.seed = j.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw QueryError(std::string("malformed workload: ") + e.what());
  }
  if (spec.max_joins && *spec.max_joins < 0) throw ArgumentError("max_joins must be non-negative");
  return spec;
}

WorkloadSpec load_workload(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read workload '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_workload(buffer.str(), schema);
}

std::vector<std::vector<int>> connected_subgraphs(std::size_t node_count,
                                                  const std::vector<std::pair<int, int>>& edges) {
  std::vector<std::set<int>> adjacent(node_count);
  for (const auto& [a, b] : edges) {
    adjacent[static_cast<std::size_t>(a)].insert(b);
    adjacent[static_cast<std::size_t>(b)].insert(a);
  }
  std::vector<std::vector<int>> out;
  // ESU enumeration: each connected set is produced once, from its smallest node.
  std::function<void(std::vector<int>&, std::set<int>, std::set<int>&, int)> extend =
      [&](std::vector<int>& sub, std::set<int> extension, std::set<int>& neighborhood, int v) {
        auto sorted = sub;
        std::sort(sorted.begin(), sorted.end());
        out.push_back(std::move(sorted));
        while (!extension.empty()) {
          const int w = *extension.begin();
          extension.erase(extension.begin());
          auto next_extension = extension;
          std::vector<int> added;
          for (const int u : adjacent[static_cast<std::size_t>(w)]) {
            if (u > v && !neighborhood.count(u)) {
              next_extension.insert(u);
              added.push_back(u);
            }
          }
          for (const int u : added) neighborhood.insert(u);
          sub.push_back(w);
          extend(sub, next_extension, neighborhood, v);
          sub.pop_back();
          for (const int u : added) neighborhood.erase(u);
        }
      };
  for (int v = 0; v < static_cast<int>(node_count); ++v) {
    std::vector<int> sub{v};
    std::set<int> extension;
    std::set<int> neighborhood{v};
    for (const int u : adjacent[static_cast<std::size_t>(v)]) {
      neighborhood.insert(u);
      if (u > v) extension.insert(u);
    }
    extend(sub, extension, neighborhood, v);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Query> expand(const Query& seed, const Schema& schema, std::optional<int> max_joins) {
  const auto& relations = seed.relations;
  auto index_of = [&](const std::string& r) {
    return static_cast<int>(std::find(relations.begin(), relations.end(), r) - relations.begin());
  };
  std::vector<std::pair<int, int>> edges;
  for (const auto& j : seed.joins) edges.emplace_back(index_of(j.parent), index_of(join_child(j, schema)));

  std::set<std::string> seen;
  std::vector<std::pair<std::string, Query>> out;
  for (const auto& subset : connected_subgraphs(relations.size(), edges)) {
    if (max_joins && static_cast<int>(subset.size()) - 1 > *max_joins) continue;
    Query base;
    std::set<std::string> included;
    for (const int i : subset) {
      base.relations.push_back(relations[static_cast<std::size_t>(i)]);
      included.insert(relations[static_cast<std::size_t>(i)]);
    }
    for (std::size_t e = 0; e < seed.joins.size(); ++e) {
      const auto [a, b] = edges[e];
      if (included.count(relations[static_cast<std::size_t>(a)]) && included.count(relations[static_cast<std::size_t>(b)])) {
        base.joins.push_back(seed.joins[e]);
      }
    }
    std::vector<const Predicate*> filters;
    for (const auto& p : seed.predicates) {
      if (included.count(p.relation)) filters.push_back(&p);
    }
    if (filters.size() > 24) {
      throw ResourceError("seed has " + std::to_string(filters.size()) + " predicates on one subgraph; too many subsets");
    }
    const std::uint32_t subsets = std::uint32_t{1} << filters.size();
    for (std::uint32_t mask = 1; mask < subsets; ++mask) {
      Query q = base;
      for (std::size_t i = 0; i < filters.size(); ++i) {
        if (mask & (std::uint32_t{1} << i)) q.predicates.push_back(*filters[i]);
      }
      q = q.canonical();
      auto text = print_query(q);
      if (seen.insert(text).second) out.emplace_back(std::move(text), std::move(q));
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Query> queries;
  queries.reserve(out.size());
  for (auto& [text, q] : out) queries.push_back(std::move(q));
  return queries;
}

std::vector<Query> expand_workload(const WorkloadSpec& spec, const Schema& schema) {
  std::map<std::string, Query> all;
  for (const auto& seed : spec.seeds) {
    for (auto& q : expand(seed, schema, spec.max_joins)) all.emplace(print_query(q), std::move(q));
  }
  std::vector<Query> queries;
  queries.reserve(all.size());
  for (auto& [text, q] : all) queries.push_back(std::move(q));
  if (spec.cap && *spec.cap < queries.size()) {
    std::mt19937_64 rng(spec.seed);
    // Partial Fisher-Yates over positions: the first `cap` become a uniform
    // sample. Positions follow the printed order, so sorting them restores it.
    std::vector<std::size_t> order(queries.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < *spec.cap; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
      std::swap(order[i], order[pick(rng)]);
    }
    order.resize(*spec.cap);
    std::sort(order.begin(), order.end());
    std::vector<Query> sample;
    sample.reserve(order.size());
    for (const auto i : order) sample.push_back(std::move(queries[i]));
    queries = std::move(sample);
  }
  return queries;
}

double q_error(double truth, double estimate) {
  if (!(truth > 0.0) || !(estimate > 0.0)) throw ArgumentError("q-error needs positive inputs");
  return std::max(truth, estimate) / std::min(truth, estimate);
}

double cardinality_q_error(double true_cardinality, double estimated_cardinality) {
  return q_error(std::max(1.0, true_cardinality), std::max(1.0, estimated_cardinality));
}

double nearest_rank(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0.0;
  auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(sorted.size())));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

MethodStats summarize(const std::string& method, std::vector<double> q_errors) {
  MethodStats s;
  s.method = method;
  s.count = q_errors.size();
  if (q_errors.empty()) return s;
  std::sort(q_errors.begin(), q_errors.end());
  s.median = nearest_rank(q_errors, 0.5);
  s.p90 = nearest_rank(q_errors, 0.9);
  s.p95 = nearest_rank(q_errors, 0.95);
  s.p99 = nearest_rank(q_errors, 0.99);
  s.max = q_errors.back();
  double total = 0.0;
  for (const double q : q_errors) total += q;
  s.mean = total / static_cast<double>(q_errors.size());
  return s;
}

BenchResult run_bench(const Catalog& catalog, const std::vector<BenchMethod>& methods,
                      const std::vector<Query>& queries, const BenchOptions& options) {
  BenchResult result;
  for (const auto& m : methods) result.methods.push_back(m.info);
  const auto n = queries.size();
  const auto width = methods.size();
  std::vector<QueryRecord> slots(n * width);
  std::vector<char> filled(n, 0);
  std::vector<std::string> errors(n);

  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, options.jobs))
  for (std::int64_t i = 0; i < count; ++i) {
    const auto qi = static_cast<std::size_t>(i);
    const auto& query = queries[qi];
    Truth truth;
    try {
      truth = exact(catalog, query, options.oracle);
    } catch (const Error& e) {
      errors[qi] = e.what();
      continue;
    }
    const auto text = print_query(query);
    for (std::size_t m = 0; m < width; ++m) {
      const auto est = methods[m].estimator->estimate(query);
      auto& r = slots[qi * width + m];
      r.query_id = qi;
      r.query = text;
      r.joins = query.joins.size();
      r.filters = query.predicates.size();
      r.method = methods[m].info.name;
      r.true_cardinality = static_cast<double>(truth.qualifying);
      r.estimated_cardinality = est.cardinality;
      r.true_selectivity = truth.selectivity;
      r.estimated_selectivity = est.selectivity;
      r.q = cardinality_q_error(r.true_cardinality, r.estimated_cardinality);
      r.elapsed_ms = est.elapsed_ms;
      r.degenerate = est.degenerate;
    }
    filled[qi] = 1;
  }

  for (std::size_t qi = 0; qi < n; ++qi) {
    if (!filled[qi]) {
      spdlog::warn("skipping query {}: {}", qi, errors[qi]);
      result.skipped.push_back({qi, errors[qi]});
      continue;
    }
    ++result.query_count;
    ++result.queries_by_joins[queries[qi].joins.size()];
    ++result.queries_by_filters[queries[qi].predicates.size()];
    for (std::size_t m = 0; m < width; ++m) result.records.push_back(std::move(slots[qi * width + m]));
  }
  for (std::size_t m = 0; m < width; ++m) {
    std::vector<double> qs;
    for (const auto& r : result.records) {
      if (r.method == methods[m].info.name) qs.push_back(r.q);
    }
    result.stats.push_back(summarize(methods[m].info.name, std::move(qs)));
  }
  return result;
}

std::string join_bucket(std::size_t joins) {
  if (joins == 0) return "0";
  if (joins == 1) return "1";
  if (joins <= 5) return "2-5";
  return ">=6";
}

namespace {

std::string num(double v) { return fmt::format("{:.17g}", v); }

std::ofstream open_report(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report file '" + path.string() + "'");
  return out;
}

}  // namespace

void emit_report(const BenchResult& result, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create report directory '" + dir.string() + "': " + ec.message());

  {
    auto out = open_report(dir / "records.csv");
    out << "query_id,method,joins,filters,true_cardinality,estimated_cardinality,true_selectivity,"
           "estimated_selectivity,q_error,degenerate,query\n";
    for (const auto& r : result.records) {
      out << r.query_id << ',' << r.method << ',' << r.joins << ',' << r.filters << ',' << num(r.true_cardinality)
          << ',' << num(r.estimated_cardinality) << ',' << num(r.true_selectivity) << ','
          << num(r.estimated_selectivity) << ',' << num(r.q) << ',' << (r.degenerate ? 1 : 0) << ','
          << csv_escape(r.query) << '\n';
    }
  }
  {
    auto out = open_report(dir / "qerror_summary.csv");
    out << "method,count,median,p90,p95,p99,max,mean\n";
    for (const auto& s : result.stats) {
      out << s.method << ',' << s.count << ',' << num(s.median) << ',' << num(s.p90) << ',' << num(s.p95) << ','
          << num(s.p99) << ',' << num(s.max) << ',' << num(s.mean) << '\n';
    }
  }
  {
    auto out = open_report(dir / "sorted_qerrors.csv");
    out << "method,rank,q_error\n";
    for (const auto& s : result.stats) {
      std::vector<double> qs;
      for (const auto& r : result.records) {
        if (r.method == s.method) qs.push_back(r.q);
      }
      std::sort(qs.begin(), qs.end());
      for (std::size_t i = 0; i < qs.size(); ++i) out << s.method << ',' << i + 1 << ',' << num(qs[i]) << '\n';
    }
  }
  {
    static const std::vector<std::string> buckets{"0", "1", "2-5", ">=6"};
    auto out = open_report(dir / "timing_by_joins.csv");
    out << "method,joins,count,mean_ms,sd_ms\n";
    for (const auto& info : result.methods) {
      for (const auto& bucket : buckets) {
        std::vector<double> times;
        for (const auto& r : result.records) {
          if (r.method == info.name && join_bucket(r.joins) == bucket) times.push_back(r.elapsed_ms);
        }
        double mean = 0.0, sd = 0.0;
        if (!times.empty()) {
          for (const double t : times) mean += t;
          mean /= static_cast<double>(times.size());
          for (const double t : times) sd += (t - mean) * (t - mean);
          sd = times.size() > 1 ? std::sqrt(sd / static_cast<double>(times.size() - 1)) : 0.0;
        }
        out << info.name << ',' << bucket << ',' << times.size() << ',' << num(mean) << ',' << num(sd) << '\n';
      }
    }
  }
  {
    json summary;
    summary["queries"] = result.query_count;
    json methods = json::array();
    for (std::size_t m = 0; m < result.methods.size(); ++m) {
      const auto& info = result.methods[m];
      const auto& s = result.stats[m];
      methods.push_back({{"name", info.name},
                         {"construction_seconds", info.construction_seconds},
                         {"model_bytes", info.model_bytes},
                         {"qerror",
                          {{"count", s.count},
                           {"median", s.median},
                           {"p90", s.p90},
                           {"p95", s.p95},
                           {"p99", s.p99},
                           {"max", s.max},
                           {"mean", s.mean}}}});
    }
    summary["methods"] = methods;
    json by_joins = json::object(), by_filters = json::object();
    for (const auto& [k, v] : result.queries_by_joins) by_joins[std::to_string(k)] = v;
    for (const auto& [k, v] : result.queries_by_filters) by_filters[std::to_string(k)] = v;
    summary["queries_by_joins"] = by_joins;
    summary["queries_by_filters"] = by_filters;
    json skipped = json::array();
    for (const auto& s : result.skipped) skipped.push_back({{"query_id", s.query_id}, {"reason", s.reason}});
    summary["skipped"] = skipped;
    auto out = open_report(dir / "summary.json");
    out << summary.dump(2) << '\n';
  }
}

}  // namespace lbn
