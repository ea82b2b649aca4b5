#include <gtest/gtest.h>

#include "textagg/encoder.hpp"
#include "textagg/error.hpp"
#include "textagg/prng.hpp"

using namespace textagg;

namespace {

constexpr std::size_t kDModel = 8;
constexpr std::size_t kVocab = 40;

Matrix<float> random_matrix(std::size_t r, std::size_t c, Xorshift64Star& rng) {
  Matrix<float> m(r, c);
  for (auto& x : m.values()) x = static_cast<float>(rng.uniform(-1, 1));
  return m;
}

EncoderHeads random_heads(std::size_t d_cls, std::size_t d_agg, std::uint64_t seed) {
  Xorshift64Star rng(seed);
  EncoderHeads h{MlmHead(random_matrix(kDModel, kVocab, rng), std::vector<float>(kVocab, 0.1f)),
                 TermWeightHead(random_matrix(1, kDModel, rng).storage(), 0.2f),
                 ClsProjection{random_matrix(kDModel, d_cls, rng), std::vector<float>(d_cls, 0.5f)},
                 random_matrix(kVocab, d_agg, rng), random_matrix(kDModel, d_agg, rng)};
  return h;
}

TokenEmbeddingSequence random_sequence(std::size_t len, std::uint64_t seed) {
  Xorshift64Star rng(seed);
  TokenEmbeddingSequence s;
  s.embeddings = random_matrix(len, kDModel, rng);
  for (std::size_t i = 0; i < len; ++i) {
    s.token_ids.push_back(static_cast<std::uint32_t>(rng.bounded(kVocab)));
    s.special_mask.push_back(0);
  }
  s.cls_embedding = random_matrix(1, kDModel, rng).storage();
  return s;
}

EncoderConfig small_config(std::size_t d_cls, std::size_t d_agg) {
  EncoderConfig c;
  c.d_cls = d_cls;
  c.d_agg = d_agg;
  return c;
}

}  // namespace

TEST(Encode, ConcatScoreEqualsSumOfParts) {
  const auto cfg = small_config(4, 10);
  const auto heads = random_heads(4, 10, 1);
  const auto part = make_partition(kVocab, 10, 3);
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto q = encode(random_sequence(5, 2 * s), heads, &part, cfg, SequenceRole::kQuery);
    const auto p = encode(random_sequence(20, 2 * s + 1), heads, &part, cfg);
    ASSERT_EQ(q.dim(), 14u);
    EXPECT_NEAR(similarity(q, p), similarity_cls(q, p) + similarity_agg(q, p), 1e-6);
  }
}

TEST(Encode, ZeroClsGivesAggregateOnly) {
  const auto heads = random_heads(4, 10, 1);
  const auto part = make_partition(kVocab, 10, 3);
  const auto seq = random_sequence(6, 9);
  const auto e = encode(seq, heads, &part, small_config(0, 10));
  EXPECT_TRUE(e.cls_part.empty());
  const auto lexical = weighted_max_pool(seq, heads.mlm, *heads.term_weight, PoolingVariant::kFull);
  EXPECT_EQ(e.agg_part.values, prune_full(lexical, part).values);
  EXPECT_EQ(e.partition, part.fingerprint());
}

TEST(Encode, ZeroAggGivesProjectedClsOnly) {
  const auto heads = random_heads(4, 10, 1);
  const auto seq = random_sequence(6, 9);
  const auto e = encode(seq, heads, nullptr, small_config(4, 0));
  EXPECT_EQ(e.agg_part.size(), 0u);
  EXPECT_EQ(e.cls_part, heads.cls->apply(seq.cls_embedding));
  EXPECT_EQ(e.partition, kNoPartition);
}

TEST(Encode, DisablingClsDropsIt) {
  auto cfg = small_config(4, 10);
  cfg.include_cls = false;
  const auto part = make_partition(kVocab, 10, 3);
  const auto e = encode(random_sequence(6, 9), random_heads(4, 10, 1), &part, cfg);
  EXPECT_TRUE(e.cls_part.empty());
  EXPECT_EQ(e.dim(), 10u);
}

TEST(Encode, Deterministic) {
  const auto heads = random_heads(4, 10, 1);
  const auto part = make_partition(kVocab, 10, 3);
  const auto seq = random_sequence(7, 4);
  const auto a = encode(seq, heads, &part, small_config(4, 10));
  const auto b = encode(seq, heads, &part, small_config(4, 10));
  EXPECT_EQ(a.flatten(), b.flatten());
}

TEST(Encode, VariantsProduceConfiguredShape) {
  const auto heads = random_heads(4, 10, 1);
  const auto part = make_partition(kVocab, 10, 3);
  const auto seq = random_sequence(7, 4);
  for (auto pk : {PruningKind::kSemi, PruningKind::kFull, PruningKind::kLinear, PruningKind::kMean}) {
    for (auto pv : {PoolingVariant::kFull, PoolingVariant::kUnitWeight, PoolingVariant::kNoMlm}) {
      auto cfg = small_config(4, 10);
      cfg.pruning_kind = pk;
      cfg.pooling_variant = pv;
      EXPECT_EQ(encode(seq, heads, &part, cfg).dim(), 14u) << to_string(pk) << " " << to_string(pv);
    }
  }
  auto avg = small_config(4, 10);
  avg.pooling_variant = PoolingVariant::kAverage;
  EXPECT_EQ(encode(seq, heads, nullptr, avg).dim(), 14u);
  auto rep = small_config(0, kDModel);
  rep.pooling_variant = PoolingVariant::kRepBert;
  EXPECT_EQ(encode(seq, heads, nullptr, rep).agg_part.values, mean_pool(seq, true));
}

TEST(Encode, SemiPruningNeverNegative) {
  auto cfg = small_config(0, 10);
  cfg.pruning_kind = PruningKind::kSemi;
  const auto heads = random_heads(4, 10, 1);
  const auto part = make_partition(kVocab, 10, 3);
  for (std::uint64_t s = 0; s < 10; ++s) {
    for (float x : encode(random_sequence(5, s), heads, &part, cfg).agg_part.values) EXPECT_GE(x, 0.0f);
  }
}

TEST(Encode, ErrorsOnMissingPiecesAndLength) {
  const auto heads = random_heads(4, 10, 1);
  const auto seq = random_sequence(7, 4);
  EXPECT_THROW(encode(seq, heads, nullptr, small_config(4, 10)), InvalidArgument);
  const auto wrong = make_partition(kVocab, 12, 3);
  EXPECT_THROW(encode(seq, heads, &wrong, small_config(4, 10)), InvalidArgument);
  auto cfg = small_config(4, 10);
  cfg.max_query_len = 3;
  const auto part = make_partition(kVocab, 10, 3);
  EXPECT_THROW(encode(seq, heads, &part, cfg, SequenceRole::kQuery), ValidationError);
  EXPECT_THROW(small_config(0, 0).validate(), InvalidArgument);
}

TEST(EncoderConfig, NamesRoundTrip) {
  for (auto pk : {PruningKind::kSemi, PruningKind::kFull, PruningKind::kLinear, PruningKind::kMean}) {
    EXPECT_EQ(parse_pruning_kind(to_string(pk)), pk);
  }
  for (auto pv : {PoolingVariant::kFull, PoolingVariant::kUnitWeight, PoolingVariant::kNoMlm,
                  PoolingVariant::kAverage, PoolingVariant::kRepBert}) {
    EXPECT_EQ(parse_pooling_variant(to_string(pv)), pv);
  }
  EXPECT_THROW(parse_pruning_kind("bogus"), InvalidArgument);
}

TEST(EncoderHeads, ContainerRoundTrip) {
  const auto heads = random_heads(4, 10, 5);
  TensorContainer c;
  heads.append_to(c);
  const auto back = EncoderHeads::from_container(TensorContainer::deserialize(c.serialize()));
  EXPECT_EQ(back.mlm.projection(), heads.mlm.projection());
  EXPECT_EQ(back.term_weight->weight, heads.term_weight->weight);
  EXPECT_EQ(back.term_weight->bias, heads.term_weight->bias);
  EXPECT_EQ(back.cls->weight, heads.cls->weight);
  EXPECT_EQ(back.cls->bias, heads.cls->bias);
  EXPECT_EQ(*back.linear, *heads.linear);
  EXPECT_EQ(*back.average, *heads.average);
}

TEST(EncoderHeads, MlmTensorsAreMandatory) {
  TensorContainer c;
  c.add({"tw.weight", {2}, {1, 2}});
  EXPECT_THROW(EncoderHeads::from_container(c), InvalidArgument);
}
