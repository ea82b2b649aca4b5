#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "textagg/error.hpp"
#include "textagg/lexrep.hpp"
#include "textagg/prng.hpp"

using namespace textagg;

namespace {

MlmHead zero_head(std::size_t d_model, std::size_t vocab) {
  return MlmHead(Matrix<float>(d_model, vocab), std::vector<float>(vocab, 0.0f));
}

// Softmax computed independently in long double.
std::vector<long double> reference_softmax(const std::vector<long double>& logits) {
  long double z = 0.0L;
  for (auto l : logits) z += std::exp(l);
  std::vector<long double> out;
  for (auto l : logits) out.push_back(std::exp(l) / z);
  return out;
}

TokenEmbeddingSequence random_sequence(std::size_t len, std::size_t d_model, std::size_t vocab,
                                       std::uint64_t seed) {
  Xorshift64Star rng(seed);
  TokenEmbeddingSequence s;
  s.embeddings = Matrix<float>(len, d_model);
  for (auto& x : s.embeddings.values()) x = static_cast<float>(rng.uniform(-1, 1));
  for (std::size_t i = 0; i < len; ++i) {
    s.token_ids.push_back(static_cast<std::uint32_t>(rng.bounded(vocab)));
    s.special_mask.push_back(0);
  }
  s.cls_embedding.assign(d_model, 0.1f);
  return s;
}

MlmHead random_head(std::size_t d_model, std::size_t vocab, std::uint64_t seed) {
  Xorshift64Star rng(seed);
  Matrix<float> w(d_model, vocab);
  for (auto& x : w.values()) x = static_cast<float>(rng.uniform(-2, 2));
  std::vector<float> b(vocab);
  for (auto& x : b) x = static_cast<float>(rng.uniform(-1, 1));
  return MlmHead(std::move(w), std::move(b));
}

}  // namespace

TEST(MlmProject, ZeroInputsGiveUniform) {
  const auto p = mlm_project(std::vector<float>{0, 0}, zero_head(2, 3));
  for (float x : p) EXPECT_NEAR(x, 1.0 / 3.0, 1e-7);
}

TEST(MlmProject, MatchesReferenceSoftmax) {
  Matrix<float> w(2, 3, std::vector<float>{1, 0, 0, 0, 1, 0});
  const auto p = mlm_project(std::vector<float>{1, 0}, MlmHead(w, {0, 0, 0}));
  const auto ref = reference_softmax({1, 0, 0});
  for (int v = 0; v < 3; ++v) EXPECT_NEAR(p[v], static_cast<double>(ref[v]), 1e-7);
  EXPECT_NEAR(p[0], 0.5761, 1e-4);
  EXPECT_NEAR(p[1], 0.2119, 1e-4);
}

TEST(MlmProject, BiasRatios) {
  const float ln2 = static_cast<float>(std::log(2.0));
  const auto p = mlm_project(std::vector<float>{0, 0},
                             MlmHead(Matrix<float>(2, 3), std::vector<float>{0, 0, ln2}));
  EXPECT_NEAR(p[0], 0.25, 1e-7);
  EXPECT_NEAR(p[1], 0.25, 1e-7);
  EXPECT_NEAR(p[2], 0.5, 1e-7);
}

TEST(MlmProject, StableForHugeLogits) {
  Matrix<float> w(1, 3, std::vector<float>{1000, 999, -1000});
  const auto p = mlm_project(std::vector<float>{50}, MlmHead(w, {0, 0, 0}));
  for (float x : p) EXPECT_TRUE(std::isfinite(x));
  EXPECT_NEAR(p[0] + p[1] + p[2], 1.0, 1e-6);
  EXPECT_NEAR(p[0], 1.0, 1e-6);
}

TEST(MlmProject, DimensionMismatchThrows) {
  EXPECT_THROW(mlm_project(std::vector<float>{1, 2, 3}, zero_head(2, 3)), InvalidArgument);
}

TEST(MlmProject, RandomOutputsAreDistributions) {
  const auto head = random_head(8, 50, 11);
  Xorshift64Star rng(2);
  for (int t = 0; t < 100; ++t) {
    std::vector<float> e(8);
    for (auto& x : e) x = static_cast<float>(rng.uniform(-3, 3));
    const auto p = mlm_project(e, head);
    double sum = 0.0;
    for (float x : p) {
      ASSERT_GE(x, 0.0f);
      sum += x;
    }
    EXPECT_NEAR(sum, 1.0, 1e-6);
  }
}

TEST(MlmHead, RejectsNonFiniteAndEmpty) {
  EXPECT_THROW(MlmHead(Matrix<float>(2, 0), {}), InvalidArgument);
  Matrix<float> w(1, 2, std::vector<float>{NAN, 0});
  EXPECT_THROW(MlmHead(w, {0, 0}), ValidationError);
  EXPECT_THROW(MlmHead(Matrix<float>(1, 2), {0}), InvalidArgument);
}

TEST(TermWeight, AbsoluteValueOfAffineScore) {
  EXPECT_FLOAT_EQ(term_weight(std::vector<float>{1, 2}, TermWeightHead({1, 1}, 0.5f)), 3.5f);
  EXPECT_FLOAT_EQ(term_weight(std::vector<float>{-1, -2}, TermWeightHead({1, 1}, 0.0f)), 3.0f);
  EXPECT_FLOAT_EQ(term_weight(std::vector<float>{0, 0}, TermWeightHead({4, 5}, 0.0f)), 0.0f);
  EXPECT_THROW(term_weight(std::vector<float>{1}, TermWeightHead({1, 1}, 0.0f)), InvalidArgument);
}

TEST(WeightedMaxPool, SingleTokenUnitWeightEqualsProjection) {
  auto seq = random_sequence(1, 4, 10, 1);
  const auto head = random_head(4, 10, 2);
  const auto v = weighted_max_pool(seq, head, TermWeightHead({}, 0), PoolingVariant::kUnitWeight);
  EXPECT_EQ(v.values, mlm_project(seq.embeddings.row(0), head));
}

TEST(WeightedMaxPool, ElementwiseWeightedMax) {
  // Identity-like head on two dims, zero bias, so p_i = softmax(e_i). Pick
  // logits giving p1 = [.6, .4], p2 = [.3, .7].
  const float a = static_cast<float>(std::log(0.6 / 0.4));
  const float b = static_cast<float>(std::log(0.3 / 0.7));
  TokenEmbeddingSequence seq;
  // Column 2 of the embedding carries the term-weight signal only.
  seq.embeddings = Matrix<float>(2, 2, std::vector<float>{a, 2.0f, b, 1.0f});
  seq.token_ids = {0, 1};
  seq.special_mask = {0, 0};
  seq.cls_embedding = {0, 0};
  MlmHead head(Matrix<float>(2, 2, std::vector<float>{1, 0, 0, 0}), {0, 0});
  const auto v = weighted_max_pool(seq, head, TermWeightHead({0, 1}, 0), PoolingVariant::kFull);
  EXPECT_NEAR(v.values[0], 1.2, 1e-6);
  EXPECT_NEAR(v.values[1], 0.8, 1e-6);
}

TEST(WeightedMaxPool, NoMlmUsesIndicatorTimesMaxWeight) {
  TokenEmbeddingSequence seq;
  seq.embeddings = Matrix<float>(2, 1, std::vector<float>{2, 5});
  seq.token_ids = {3, 3};
  seq.special_mask = {0, 0};
  seq.cls_embedding = {0};
  const auto v =
      weighted_max_pool(seq, zero_head(1, 4), TermWeightHead({1}, 0), PoolingVariant::kNoMlm);
  EXPECT_EQ(v.values, (std::vector<float>{0, 0, 0, 5}));
}

TEST(WeightedMaxPool, MaskedPositionsAreExcluded) {
  auto seq = random_sequence(3, 4, 10, 3);
  seq.special_mask = {1, 0, 1};
  const auto head = random_head(4, 10, 4);
  const auto v = weighted_max_pool(seq, head, TermWeightHead({}, 0), PoolingVariant::kUnitWeight);
  EXPECT_EQ(v.values, mlm_project(seq.embeddings.row(1), head));
}

TEST(WeightedMaxPool, AllMaskedThrowsEmptySequence) {
  auto seq = random_sequence(2, 4, 10, 3);
  seq.special_mask = {1, 1};
  EXPECT_THROW(weighted_max_pool(seq, random_head(4, 10, 1), TermWeightHead({}, 0),
                                 PoolingVariant::kUnitWeight),
               EmptySequenceError);
}

TEST(WeightedMaxPool, SepFlagIncludesSepPositions) {
  auto seq = random_sequence(2, 4, 10, 5);
  seq.token_ids[1] = 7;
  seq.special_mask = {0, 1};
  PoolingOptions opt;
  opt.include_sep = true;
  opt.sep_token_id = 7;
  EXPECT_EQ(poolable_positions(seq, opt), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(poolable_positions(seq), (std::vector<std::size_t>{0}));
}

TEST(WeightedMaxPool, NonLexicalVariantRejected) {
  auto seq = random_sequence(2, 4, 10, 5);
  EXPECT_THROW(weighted_max_pool(seq, random_head(4, 10, 1), TermWeightHead({0, 0, 0, 0}, 0),
                                 PoolingVariant::kAverage),
               InvalidArgument);
}

TEST(WeightedMaxPoolProperty, DominatesEveryWeightedTermWithEqualityAtMax) {
  const auto head = random_head(6, 40, 8);
  const TermWeightHead tw({0.3f, -0.2f, 0.5f, 0.1f, 0.0f, -0.4f}, 0.2f);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto seq = random_sequence(5, 6, 40, seed);
    const auto v = weighted_max_pool(seq, head, tw, PoolingVariant::kFull);
    for (std::size_t u = 0; u < 40; ++u) {
      double best = 0.0;
      for (std::size_t i = 0; i < 5; ++i) {
        const double t = static_cast<double>(term_weight(seq.embeddings.row(i), tw)) *
                         mlm_project(seq.embeddings.row(i), head)[u];
        ASSERT_GE(v.values[u], static_cast<float>(t) * (1 - 1e-6f));
        best = std::max(best, t);
      }
      EXPECT_NEAR(v.values[u], best, 1e-6 * best + 1e-12);
    }
  }
}

TEST(WeightedMaxPoolProperty, PermutationInvariant) {
  const auto head = random_head(6, 30, 9);
  const TermWeightHead tw({0.3f, -0.2f, 0.5f, 0.1f, 0.0f, -0.4f}, 0.2f);
  const auto seq = random_sequence(6, 6, 30, 4);
  TokenEmbeddingSequence rev = seq;
  for (std::size_t i = 0; i < 6; ++i) {
    const auto src = seq.embeddings.row(5 - i);
    std::copy(src.begin(), src.end(), rev.embeddings.row(i).begin());
    rev.token_ids[i] = seq.token_ids[5 - i];
  }
  EXPECT_EQ(weighted_max_pool(seq, head, tw, PoolingVariant::kFull).values,
            weighted_max_pool(rev, head, tw, PoolingVariant::kFull).values);
}

TEST(WeightedMaxPoolProperty, HomogeneousInTermWeights) {
  const auto head = random_head(4, 20, 1);
  const auto seq = random_sequence(4, 4, 20, 2);
  const TermWeightHead tw({0.5f, 0.25f, -0.5f, 1.0f}, 0.125f);
  // Scaling W and b by 4 scales every w_i by exactly 4 in binary floating point.
  const TermWeightHead tw4({2.0f, 1.0f, -2.0f, 4.0f}, 0.5f);
  const auto a = weighted_max_pool(seq, head, tw, PoolingVariant::kFull);
  const auto b = weighted_max_pool(seq, head, tw4, PoolingVariant::kFull);
  for (std::size_t u = 0; u < 20; ++u) EXPECT_NEAR(b.values[u], 4.0f * a.values[u], 1e-6f * b.values[u]);
}

TEST(WeightedMaxPoolProperty, NoMlmSupportBoundedByDistinctTokens) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto seq = random_sequence(8, 3, 12, seed);
    const auto v = weighted_max_pool(seq, zero_head(3, 12), TermWeightHead({1, 1, 1}, 0.5f),
                                     PoolingVariant::kNoMlm);
    std::vector<std::uint32_t> ids = seq.token_ids;
    std::sort(ids.begin(), ids.end());
    const auto distinct = std::unique(ids.begin(), ids.end()) - ids.begin();
    EXPECT_LE(std::count_if(v.values.begin(), v.values.end(), [](float x) { return x != 0; }),
              distinct);
  }
}

TEST(MeanPool, ExcludesOrIncludesCls) {
  TokenEmbeddingSequence seq;
  seq.embeddings = Matrix<float>(2, 1, std::vector<float>{2, 4});
  seq.token_ids = {5, 6};
  seq.special_mask = {0, 0};
  seq.cls_embedding = {9};
  EXPECT_EQ(mean_pool(seq, false), (std::vector<float>{3}));
  EXPECT_EQ(mean_pool(seq, true), (std::vector<float>{5}));
}

TEST(TokenEmbeddingSequence, ValidateCatchesBadShapes) {
  auto seq = random_sequence(3, 2, 5, 1);
  EXPECT_NO_THROW(seq.validate(5));
  seq.token_ids[0] = 5;
  EXPECT_THROW(seq.validate(5), InvalidArgument);
  seq = random_sequence(3, 2, 5, 1);
  seq.special_mask.pop_back();
  EXPECT_THROW(seq.validate(5), InvalidArgument);
  seq = random_sequence(3, 2, 5, 1);
  seq.cls_embedding.push_back(0);
  EXPECT_THROW(seq.validate(5), InvalidArgument);
}
