#include <benchmark/benchmark.h>

#include "textagg/lexrep.hpp"
#include "textagg/prng.hpp"

using namespace textagg;

namespace {

constexpr std::size_t kDModel = 768;
constexpr std::size_t kVocab = 30522;

const MlmHead& head() {
  static const MlmHead h = [] {
    Xorshift64Star rng(1);
    Matrix<float> w(kDModel, kVocab);
    for (auto& x : w.values()) x = static_cast<float>(rng.uniform(-0.05, 0.05));
    return MlmHead(std::move(w), std::vector<float>(kVocab, 0.0f));
  }();
  return h;
}

TokenEmbeddingSequence sequence(std::size_t len) {
  Xorshift64Star rng(2);
  TokenEmbeddingSequence s;
  s.embeddings = Matrix<float>(len, kDModel);
  for (auto& x : s.embeddings.values()) x = static_cast<float>(rng.normal());
  for (std::size_t i = 0; i < len; ++i) {
    s.token_ids.push_back(static_cast<std::uint32_t>(rng.bounded(kVocab)));
    s.special_mask.push_back(0);
  }
  s.cls_embedding.assign(kDModel, 0.0f);
  return s;
}

void BM_MlmProject(benchmark::State& state) {
  const auto seq = sequence(1);
  head();
  for (auto _ : state) benchmark::DoNotOptimize(mlm_project(seq.embeddings.row(0), head()));
}
BENCHMARK(BM_MlmProject)->Unit(benchmark::kMillisecond);

void BM_WeightedMaxPool(benchmark::State& state) {
  const auto seq = sequence(static_cast<std::size_t>(state.range(0)));
  const TermWeightHead tw(std::vector<float>(kDModel, 0.01f), 0.1f);
  head();
  for (auto _ : state) {
    benchmark::DoNotOptimize(weighted_max_pool(seq, head(), tw, PoolingVariant::kFull));
  }
}
BENCHMARK(BM_WeightedMaxPool)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace
