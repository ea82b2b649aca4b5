#include <benchmark/benchmark.h>

#include "textagg/analysis.hpp"
#include "textagg/prng.hpp"
#include "textagg/pruning.hpp"

using namespace textagg;

namespace {

LexicalVector dense_vector(std::size_t vocab, std::uint64_t seed) {
  Xorshift64Star rng(seed);
  LexicalVector v;
  v.values.resize(vocab);
  for (auto& x : v.values) x = static_cast<float>(rng.exponential());
  return v;
}

void BM_MakePartition(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(make_partition(30522, 640, 1));
}
BENCHMARK(BM_MakePartition)->Unit(benchmark::kMillisecond);

void BM_PruneFull(benchmark::State& state) {
  const auto part = make_partition(30522, static_cast<std::size_t>(state.range(0)), 1);
  const auto v = dense_vector(30522, 2);
  for (auto _ : state) benchmark::DoNotOptimize(prune_full(v, part));
  state.SetItemsProcessed(state.iterations() * 30522);
}
BENCHMARK(BM_PruneFull)->Arg(128)->Arg(640)->Arg(4096);

void BM_PruneSemi(benchmark::State& state) {
  const auto part = make_partition(30522, 640, 1);
  const auto v = dense_vector(30522, 2);
  for (auto _ : state) benchmark::DoNotOptimize(prune_semi(v, part));
  state.SetItemsProcessed(state.iterations() * 30522);
}
BENCHMARK(BM_PruneSemi);

void BM_SparsePrunedDot(benchmark::State& state) {
  EnsembleOptions o;
  o.pairs = 64;
  const auto pairs = make_ensemble(o);
  const auto red = make_reduction(o.vocab_size, static_cast<std::size_t>(state.range(0)), 3);
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& pr = pairs[i++ % pairs.size()];
    benchmark::DoNotOptimize(pruned_dot(pr.q, pr.p, red, Pruner::kAggStar));
  }
}
BENCHMARK(BM_SparsePrunedDot)->Arg(64)->Arg(1024);

}  // namespace
