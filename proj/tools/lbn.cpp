// Command-line front end: build / estimate / oracle / workload expand / bench.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "lbn/baselines.hpp"
#include "lbn/error.hpp"
#include "lbn/inference.hpp"
#include "lbn/linker.hpp"
#include "lbn/oracle.hpp"
#include "lbn/workload.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunConfig {
  std::string schema;
  std::string model;
  std::string query;
  std::string workload;
  std::string out;
  std::string samples;
  int k = 1;
  std::string method = "linked";
  std::vector<std::string> methods;
  double rate = lbn::kDefaultSampleRate;
  std::uint64_t seed = 0;
  bool clamp = true;
  std::size_t expand_cap = 0;
  int max_joins = -1;
  int jobs = 1;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("lbn");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("LBN_LOG")) spdlog::set_level(spdlog::level::from_str(env));
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void check_fingerprint(const lbn::LinkedModel& model, const lbn::Schema& schema) {
  if (model.schema_fingerprint != schema.fingerprint()) {
    throw lbn::ModelError("model was built for schema " + model.schema_fingerprint + ", not " +
                          schema.fingerprint());
  }
}

lbn::SampleSet samples_for(const RunConfig& cfg, const lbn::Catalog& catalog, lbn::SampleMode mode) {
  if (!cfg.samples.empty()) {
    const fs::path dir = fs::path(cfg.samples) / lbn::to_string(mode);
    if (fs::exists(dir / "manifest.json")) return lbn::load_samples(dir);
    auto s = lbn::draw_samples(catalog, cfg.rate, cfg.seed, mode);
    lbn::save_samples(s, dir);
    return s;
  }
  return lbn::draw_samples(catalog, cfg.rate, cfg.seed, mode);
}

json estimate_json(const lbn::Estimate& e) {
  return {{"selectivity", e.selectivity},
          {"cardinality", e.cardinality},
          {"method", e.method},
          {"elapsed_ms", e.elapsed_ms},
          {"degenerate", e.degenerate}};
}

int cmd_build(const RunConfig& cfg) {
  const auto catalog = lbn::load_catalog(cfg.schema);
  const auto model = lbn::build_linked(catalog, {cfg.k});
  lbn::save_model(model, cfg.out);
  json relations = json::object();
  for (const auto& [name, s] : model.stats.relation_seconds) relations[name] = s;
  json report{{"model", cfg.out},
              {"k", cfg.k},
              {"relation_seconds", relations},
              {"construction_seconds", model.stats.total_seconds},
              {"model_bytes", fs::file_size(cfg.out)}};
  std::cout << report.dump() << '\n';
  return 0;
}

int cmd_estimate(const RunConfig& cfg) {
  const auto schema = lbn::load_schema(cfg.schema);
  const auto query = lbn::load_query(cfg.query, schema);
  const lbn::EstimateOptions options{cfg.clamp};
  std::unique_ptr<lbn::Estimator> estimator;
  if (cfg.method == "linked") {
    auto model = std::make_shared<const lbn::LinkedModel>(lbn::load_model(cfg.model));
    check_fingerprint(*model, schema);
    estimator = std::make_unique<lbn::LinkedEstimator>(model, options);
  } else {
    auto catalog = std::make_shared<const lbn::Catalog>(lbn::load_catalog(cfg.schema));
    if (cfg.method == "avi") {
      estimator = std::make_unique<lbn::AviEstimator>(catalog, options);
    } else if (cfg.method == "sampling" || cfg.method == "correlated") {
      const auto mode = cfg.method == "sampling" ? lbn::SampleMode::kUniform : lbn::SampleMode::kCorrelated;
      estimator = std::make_unique<lbn::SamplingEstimator>(catalog, samples_for(cfg, *catalog, mode), options);
    } else {
      throw lbn::ArgumentError("unknown method '" + cfg.method + "'");
    }
  }
  std::cout << estimate_json(estimator->estimate(query)).dump() << '\n';
  return 0;
}

int cmd_oracle(const RunConfig& cfg) {
  const auto catalog = lbn::load_catalog(cfg.schema);
  const auto query = lbn::load_query(cfg.query, catalog.schema);
  const auto t = lbn::exact(catalog, query);
  std::cout << json{{"qualifying", t.qualifying},
                    {"join_size", t.join_size},
                    {"selectivity", t.selectivity},
                    {"elapsed_ms", t.elapsed_ms}}
                   .dump()
            << '\n';
  return 0;
}

lbn::WorkloadSpec workload_spec(const RunConfig& cfg, const lbn::Schema& schema) {
  auto spec = lbn::load_workload(cfg.workload, schema);
  if (cfg.expand_cap > 0) spec.cap = cfg.expand_cap;
  if (cfg.max_joins >= 0) spec.max_joins = cfg.max_joins;
  spec.seed = cfg.seed;
  return spec;
}

int cmd_expand(const RunConfig& cfg) {
  const auto schema = lbn::load_schema(cfg.schema);
  const auto queries = lbn::expand_workload(workload_spec(cfg, schema), schema);
  std::ofstream file;
  if (!cfg.out.empty()) {
    file.open(cfg.out);
    if (!file) throw lbn::IoError("cannot write '" + cfg.out + "'");
  }
  std::ostream& out = cfg.out.empty() ? std::cout : file;
  for (const auto& q : queries) out << lbn::print_query(q) << '\n';
  return 0;
}

int cmd_bench(const RunConfig& cfg) {
  auto catalog = std::make_shared<const lbn::Catalog>(lbn::load_catalog(cfg.schema));
  const auto queries = lbn::expand_workload(workload_spec(cfg, catalog->schema), catalog->schema);
  spdlog::info("benchmarking {} queries", queries.size());
  const lbn::EstimateOptions options{cfg.clamp};

  auto methods = cfg.methods;
  if (methods.empty()) methods = {"avi", "sampling", "correlated", "k0", "k1", "k2"};
  std::vector<lbn::BenchMethod> bench;
  for (const auto& name : methods) {
    const auto start = std::chrono::steady_clock::now();
    if (name == "avi") {
      auto e = std::make_shared<lbn::AviEstimator>(catalog, options);
      bench.push_back({e, {name, seconds_since(start), e->model_bytes()}});
    } else if (name == "sampling" || name == "correlated") {
      const auto mode = name == "sampling" ? lbn::SampleMode::kUniform : lbn::SampleMode::kCorrelated;
      auto e = std::make_shared<lbn::SamplingEstimator>(catalog, samples_for(cfg, *catalog, mode), options);
      bench.push_back({e, {name, seconds_since(start), e->sample_rows() * sizeof(std::uint32_t)}});
    } else if (name.size() > 1 && name[0] == 'k' && name.find_first_not_of("0123456789", 1) == std::string::npos) {
      auto model = std::make_shared<const lbn::LinkedModel>(lbn::build_linked(*catalog, {std::stoi(name.substr(1))}));
      const auto bytes = lbn::serialize_model(*model).size();
      bench.push_back({std::make_shared<lbn::LinkedEstimator>(model, options, name),
                       {name, model->stats.total_seconds, bytes}});
    } else {
      throw lbn::ArgumentError("unknown method '" + name + "'");
    }
  }
  const auto result = lbn::run_bench(*catalog, bench, queries, {cfg.jobs, {}});
  lbn::emit_report(result, cfg.out);
  json summary = json::array();
  for (const auto& s : result.stats) summary.push_back({{"method", s.method}, {"median", s.median}, {"max", s.max}});
  std::cout << json{{"queries", result.query_count}, {"skipped", result.skipped.size()}, {"out", cfg.out},
                    {"qerror", summary}}
                   .dump()
            << '\n';
  return 0;
}

void print_error(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  RunConfig cfg;
  CLI::App app{"Linked Bayesian network selectivity estimation"};
  app.set_config("--config", "", "TOML/INI file with option defaults; flags override it");
  app.require_subcommand(1);

  auto add_schema = [&](CLI::App* sub) { sub->add_option("--schema", cfg.schema, "Schema JSON")->required(); };
  auto add_clamp = [&](CLI::App* sub) {
    sub->add_flag("--clamp,!--no-clamp", cfg.clamp, "Floor selectivities at 1/(2 * join size)");
  };
  auto add_sampling = [&](CLI::App* sub) {
    sub->add_option("--rate", cfg.rate, "Sampling rate")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--seed", cfg.seed, "Random seed");
    sub->add_option("--samples", cfg.samples, "Directory to load or persist samples");
  };

  auto* build = app.add_subcommand("build", "Learn a linked model");
  add_schema(build);
  build->add_option("-k,--k", cfg.k, "Attributes exported per FK edge")->check(CLI::NonNegativeNumber);
  build->add_option("--out", cfg.out, "Model file")->required();

  auto* estimate = app.add_subcommand("estimate", "Estimate one query");
  add_schema(estimate);
  estimate->add_option("--model", cfg.model, "Model file (method linked)");
  estimate->add_option("--query", cfg.query, "Query file (.json or .sql)")->required();
  estimate->add_option("--method", cfg.method, "linked, avi, sampling or correlated");
  add_clamp(estimate);
  add_sampling(estimate);

  auto* oracle = app.add_subcommand("oracle", "Exact selectivity of one query");
  add_schema(oracle);
  oracle->add_option("--query", cfg.query, "Query file (.json or .sql)")->required();

  auto* workload = app.add_subcommand("workload", "Workload tools");
  workload->require_subcommand(1);
  auto* expand = workload->add_subcommand("expand", "Expand seed queries into subqueries");
  add_schema(expand);
  expand->add_option("--workload", cfg.workload, "Workload JSON")->required();
  expand->add_option("--expand-cap", cfg.expand_cap, "Keep a random subset of this many queries");
  expand->add_option("--max-joins", cfg.max_joins, "Drop subqueries with more joins");
  expand->add_option("--seed", cfg.seed, "Seed for the subset");
  expand->add_option("--out", cfg.out, "Output file, one query per line (default stdout)");

  auto* bench = app.add_subcommand("bench", "Run estimators against the oracle");
  add_schema(bench);
  bench->add_option("--workload", cfg.workload, "Workload JSON")->required();
  bench->add_option("--methods", cfg.methods, "avi, sampling, correlated, k<N>")->delimiter(',');
  bench->add_option("--expand-cap", cfg.expand_cap, "Keep a random subset of this many queries");
  bench->add_option("--max-joins", cfg.max_joins, "Drop subqueries with more joins");
  bench->add_option("--jobs", cfg.jobs, "Queries evaluated in parallel")->check(CLI::PositiveNumber);
  bench->add_option("--out", cfg.out, "Report directory")->required();
  add_clamp(bench);
  add_sampling(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("argument", e.what());
    return 2;
  }

  try {
    if (*build) return cmd_build(cfg);
    if (*estimate) return cmd_estimate(cfg);
    if (*oracle) return cmd_oracle(cfg);
    if (*expand) return cmd_expand(cfg);
    if (*bench) return cmd_bench(cfg);
  } catch (const lbn::ArgumentError& e) {
    print_error(e.kind(), e.what());
    return 2;
  } catch (const lbn::Error& e) {
    print_error(e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 0;
}
