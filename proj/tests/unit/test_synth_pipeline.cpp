#include <gtest/gtest.h>

#include <set>

#include "textagg/pipeline.hpp"
#include "textagg/synth.hpp"

using namespace textagg;

namespace {

SynthOptions small() {
  SynthOptions o;
  o.docs = 40;
  o.queries = 10;
  o.train_queries = 30;
  o.vocab_size = 128;
  o.negatives = 3;
  o.seed = 5;
  return o;
}

}  // namespace

TEST(Synth, ShapeAndRelevance) {
  const auto t = make_synth_task(small());
  EXPECT_EQ(t.corpus.size(), 40u);
  EXPECT_EQ(t.queries.size(), 10u);
  EXPECT_EQ(t.train.size(), 30u);
  std::set<std::string> targets;
  for (const auto& q : t.queries) {
    const auto it = t.qrels.judgments.find(q.id);
    ASSERT_NE(it, t.qrels.judgments.end());
    ASSERT_EQ(it->second.size(), 1u);
    targets.insert(it->second.begin()->first);
    EXPECT_GE(q.token_ids.size(), 3u);
    EXPECT_LE(q.token_ids.size(), 6u);
  }
  EXPECT_EQ(targets.size(), 10u);
  for (const auto& d : t.corpus) {
    for (auto id : d.token_ids) {
      EXPECT_GE(id, kToyFirstContentId);
      EXPECT_LT(id, 128u);
    }
  }
  for (const auto& r : t.train) {
    EXPECT_EQ(r.negatives.size(), 3u);
    for (const auto& n : r.negatives) EXPECT_NE(n, r.positive);
  }
}

TEST(Synth, QueriesDrawnFromTarget) {
  const auto t = make_synth_task(small());
  std::map<std::string, std::set<std::uint32_t>> tokens;
  for (const auto& d : t.corpus) tokens[d.id] = {d.token_ids.begin(), d.token_ids.end()};
  for (const auto& q : t.queries) {
    const auto& target = t.qrels.judgments.at(q.id).begin()->first;
    for (auto id : q.token_ids) EXPECT_TRUE(tokens[target].count(id));
  }
}

TEST(Synth, Deterministic) {
  const auto a = make_synth_task(small());
  const auto b = make_synth_task(small());
  EXPECT_EQ(format_corpus_jsonl(a.corpus), format_corpus_jsonl(b.corpus));
  EXPECT_EQ(format_training_jsonl(a.train), format_training_jsonl(b.train));
  EXPECT_EQ(format_qrels(a.qrels), format_qrels(b.qrels));
  auto o = small();
  o.seed = 6;
  EXPECT_NE(format_corpus_jsonl(make_synth_task(o).corpus), format_corpus_jsonl(a.corpus));
}

TEST(Synth, ValidatesOptions) {
  auto o = small();
  o.queries = 41;
  EXPECT_THROW(o.validate(), InvalidArgument);
  o = small();
  o.min_doc_len = 40;
  o.max_doc_len = 10;
  EXPECT_THROW(o.validate(), InvalidArgument);
}

TEST(Pipeline, RunHasOneBlockPerQuery) {
  const auto t = make_synth_task(small());
  ToyEncoderConfig c;
  c.vocab_size = 128;
  c.max_positions = 40;
  c.init_scale = 0.5;
  const ToyEncoder enc(c);
  const auto part = make_partition(128, c.encoder.d_agg, 1);
  const auto run = retrieve(enc, &part, t.corpus, t.queries, 5);
  ASSERT_EQ(run.queries.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(run.queries[i].query_id, t.queries[i].id);
    EXPECT_EQ(run.queries[i].docs.size(), 5u);
  }
  EXPECT_NO_THROW(run.validate());
  const auto threaded = retrieve(enc, &part, t.corpus, t.queries, 5, 3);
  EXPECT_EQ(format_run(threaded), format_run(run));
  const auto rr = reciprocal_rank_at(run, t.qrels);
  EXPECT_EQ(rr.evaluated, 10u);
}

TEST(Pipeline, VectorSetMatchesDirectEmbedding) {
  const auto t = make_synth_task(small());
  ToyEncoderConfig c;
  c.vocab_size = 128;
  c.max_positions = 40;
  const ToyEncoder enc(c);
  const auto part = make_partition(128, c.encoder.d_agg, 1);
  const auto vs = embed_corpus(enc, &part, t.corpus);
  ASSERT_EQ(vs.size(), 40u);
  EXPECT_EQ(vs.embedding(7).flatten(), enc.embed(t.corpus[7].token_ids, &part).flatten());
  EXPECT_EQ(build_index(vs).size(), 40u);
}
