#include <benchmark/benchmark.h>

#include "textagg/index.hpp"
#include "textagg/prng.hpp"

using namespace textagg;

namespace {

FlatIndex random_index(std::size_t n, std::size_t dim) {
  Xorshift64Star rng(1);
  Matrix<float> m(n, dim);
  for (auto& x : m.values()) x = static_cast<float>(rng.normal());
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("d" + std::to_string(i));
  return FlatIndex::build_raw(dim, kNoPartition, std::move(ids), std::move(m));
}

void BM_FlatSearch(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto index = random_index(n, 768);
  Xorshift64Star rng(2);
  std::vector<float> q(768);
  for (auto& x : q) x = static_cast<float>(rng.normal());
  for (auto _ : state) benchmark::DoNotOptimize(index.search_raw(q, k));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_FlatSearch)->Args({10000, 10})->Args({10000, 1000})->Unit(benchmark::kMillisecond);

void BM_FlatBuild(benchmark::State& state) {
  Xorshift64Star rng(3);
  Matrix<float> m(10000, 768);
  for (auto& x : m.values()) x = static_cast<float>(rng.normal());
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < 10000; ++i) ids.push_back("d" + std::to_string(i));
  for (auto _ : state) benchmark::DoNotOptimize(FlatIndex::build_raw(768, kNoPartition, ids, m));
}
BENCHMARK(BM_FlatBuild)->Unit(benchmark::kMillisecond);

}  // namespace
