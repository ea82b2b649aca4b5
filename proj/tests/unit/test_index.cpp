#include <gtest/gtest.h>

#include <algorithm>

#include "textagg/error.hpp"
#include "textagg/index.hpp"
#include "textagg/prng.hpp"

using namespace textagg;

namespace {

ConcatEmbedding vec(std::vector<float> agg, Fingerprint fp = kNoPartition) {
  ConcatEmbedding e;
  e.agg_part.values = std::move(agg);
  e.partition = fp;
  return e;
}

FlatIndex abc() {
  return FlatIndex::build({{"a", vec({1, 0})}, {"b", vec({0, 1})}, {"c", vec({1, 1})}});
}

FlatIndex random_index(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Xorshift64Star rng(seed);
  Matrix<float> m(n, dim);
  for (auto& x : m.values()) x = static_cast<float>(rng.normal());
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("doc" + std::to_string(rng.next() % 100000) + "_" + std::to_string(i));
  return FlatIndex::build_raw(dim, kNoPartition, std::move(ids), std::move(m));
}

}  // namespace

TEST(FlatIndex, WorkedExample) {
  const auto hits = abc().search(vec({1, 0.1f}), 2);
  ASSERT_EQ(hits.size(), 2u);
  EXPECT_EQ(hits[0].id, "c");
  EXPECT_NEAR(hits[0].score, 1.1, 1e-7);
  EXPECT_EQ(hits[1].id, "a");
  EXPECT_EQ(hits[1].score, 1.0);
}

TEST(FlatIndex, CountAndTruncation) {
  const auto idx = abc();
  EXPECT_EQ(idx.size(), 3u);
  EXPECT_EQ(idx.search(vec({1, 0}), 10).size(), 3u);
}

TEST(FlatIndex, EmptyIndexReturnsNothing) {
  const auto idx = FlatIndex::build({});
  EXPECT_EQ(idx.size(), 0u);
  EXPECT_TRUE(idx.search_raw(std::vector<float>{}, 5).empty());
  const FlatIndex sized(4);
  EXPECT_TRUE(sized.search_raw(std::vector<float>{1, 2, 3, 4}, 5).empty());
}

TEST(FlatIndex, ZeroQueryRanksByAscendingId) {
  const auto idx = FlatIndex::build({{"z", vec({1, 2})}, {"m", vec({3, 1})}, {"b", vec({0, 5})}});
  const auto hits = idx.search(vec({0, 0}), 3);
  EXPECT_EQ(hits[0].id, "b");
  EXPECT_EQ(hits[1].id, "m");
  EXPECT_EQ(hits[2].id, "z");
  for (const auto& h : hits) EXPECT_EQ(h.score, 0.0);
}

TEST(FlatIndex, BuildErrors) {
  EXPECT_THROW(FlatIndex::build({{"a", vec({1, 0})}, {"a", vec({0, 1})}}), BuildError);
  EXPECT_THROW(FlatIndex::build({{"a", vec({1, 0})}, {"b", vec({0, 1, 2})}}), BuildError);
  Fingerprint other{};
  other[0] = 1;
  EXPECT_THROW(FlatIndex::build({{"a", vec({1, 0})}, {"b", vec({0, 1}, other)}}), BuildError);
}

TEST(FlatIndex, QueryErrors) {
  const auto idx = abc();
  EXPECT_THROW(idx.search(vec({1, 0, 0}), 2), InvalidArgument);
  Fingerprint other{};
  other[3] = 9;
  EXPECT_THROW(idx.search(vec({1, 0}, other), 2), InvalidArgument);
  EXPECT_THROW(idx.search(vec({1, 0}), 0), InvalidArgument);
}

TEST(FlatIndexProperty, MatchesBruteForceSort) {
  const auto idx = random_index(300, 16, 4);
  Xorshift64Star rng(8);
  for (int t = 0; t < 10; ++t) {
    std::vector<float> q(16);
    for (auto& x : q) x = static_cast<float>(rng.normal());
    std::vector<SearchHit> brute;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      brute.push_back({idx.ids()[i], dot(std::span<const float>(q), idx.vectors().row(i))});
    }
    std::sort(brute.begin(), brute.end(), [](const SearchHit& a, const SearchHit& b) {
      return a.score != b.score ? a.score > b.score : a.id < b.id;
    });
    EXPECT_EQ(idx.search_raw(q, idx.size()), brute);
    EXPECT_EQ(idx.search_raw(q, idx.size(), 3), brute);
  }
}

TEST(FlatIndexProperty, PrefixConsistency) {
  const auto idx = random_index(200, 8, 5);
  std::vector<float> q{1, -1, 0.5f, 0, 2, 0.25f, -3, 1};
  const auto all = idx.search_raw(q, 200);
  for (std::size_t k : {1u, 5u, 17u, 100u}) {
    const auto top = idx.search_raw(q, k);
    EXPECT_TRUE(std::equal(top.begin(), top.end(), all.begin()));
  }
}

TEST(FlatIndexProperty, TiesBrokenByIdWithinHeap) {
  // Many equal scores force the bounded heap to apply the id rule.
  Matrix<float> m(50, 1, 1.0f);
  std::vector<std::string> ids;
  for (int i = 49; i >= 0; --i) ids.push_back("d" + std::to_string(100 + i));
  const auto idx = FlatIndex::build_raw(1, kNoPartition, ids, m);
  const auto hits = idx.search_raw(std::vector<float>{1}, 5);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(hits[i].id, "d" + std::to_string(100 + i));
}
