#include <benchmark/benchmark.h>

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lbn/catalog.hpp"
#include "lbn/structure.hpp"

namespace {

// Correlated categorical columns: each one copies its predecessor with some noise.
struct Columns {
  std::vector<lbn::EncodedColumn> data;
  std::vector<lbn::NamedColumn> named;
};

Columns make_columns(int count, std::size_t rows, int domain) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> value(0, domain - 1);
  std::bernoulli_distribution copy(0.6);
  std::vector<int> prev(rows);
  for (auto& v : prev) v = value(rng);
  Columns out;
  out.data.reserve(static_cast<std::size_t>(count));
  for (int c = 0; c < count; ++c) {
    std::vector<std::optional<std::string>> cells(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      if (c > 0 && !copy(rng)) prev[r] = value(rng);
      cells[r] = "v" + std::to_string(prev[r]);
    }
    out.data.push_back(lbn::encode_column(lbn::AttributeKind::kCategorical, cells));
  }
  for (int c = 0; c < count; ++c) out.named.push_back({"a" + std::to_string(c), &out.data[static_cast<std::size_t>(c)]});
  return out;
}

template <lbn::WeightedGraph (*Build)(std::span<const lbn::NamedColumn>)>
void mi_graph(benchmark::State& state) {
  const auto cols = make_columns(static_cast<int>(state.range(0)), static_cast<std::size_t>(state.range(1)), 24);
  for (auto _ : state) {
    auto g = Build(std::span<const lbn::NamedColumn>(cols.named));
    benchmark::DoNotOptimize(g);
  }
  const auto pairs = state.range(0) * (state.range(0) - 1) / 2;
  state.SetItemsProcessed(state.iterations() * pairs * state.range(1));
}

void shapes(benchmark::internal::Benchmark* b) {
  for (const int attrs : {4, 8, 16}) b->Args({attrs, 100000});
  b->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(mi_graph<lbn::build_mi_graph_serial>)->Name("mi_graph/serial")->Apply(shapes);
BENCHMARK(mi_graph<lbn::build_mi_graph>)->Name("mi_graph/openmp")->Apply(shapes);

BENCHMARK_MAIN();
