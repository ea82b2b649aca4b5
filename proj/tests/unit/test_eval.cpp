#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "textagg/error.hpp"
#include "textagg/eval.hpp"
#include "textagg/prng.hpp"

using namespace textagg;

namespace {

QueryRanking ranking(const std::string& qid, std::vector<std::string> docs) {
  QueryRanking r{qid, {}};
  double s = static_cast<double>(docs.size());
  for (auto& d : docs) r.docs.push_back({d, s--});
  return r;
}

RunFile run_of(std::vector<QueryRanking> q) {
  RunFile r;
  r.queries = std::move(q);
  return r;
}

std::vector<std::string> numbered(std::size_t n, const std::string& prefix = "d") {
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

// DCG over every permutation of the judged docs gives the ideal; computed
// without sorting so it shares no code path with the library.
double oracle_ndcg(const std::vector<std::string>& ranked,
                   const std::map<std::string, int>& judged, std::size_t k) {
  auto gain = [](int g) { return std::pow(2.0, g) - 1.0; };
  double dcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) {
    const auto it = judged.find(ranked[i]);
    if (it != judged.end()) dcg += gain(it->second) / std::log2(static_cast<double>(i) + 2.0);
  }
  std::vector<int> grades;
  for (const auto& [d, g] : judged) grades.push_back(g);
  std::sort(grades.begin(), grades.end());
  double ideal = 0.0;
  do {
    double v = 0.0;
    for (std::size_t i = 0; i < std::min(k, grades.size()); ++i) {
      v += gain(grades[i]) / std::log2(static_cast<double>(i) + 2.0);
    }
    ideal = std::max(ideal, v);
  } while (std::next_permutation(grades.begin(), grades.end()));
  return ideal == 0.0 ? 0.0 : dcg / ideal;
}

}  // namespace

TEST(ReciprocalRank, Examples) {
  Qrels q;
  q.add("q1", "d3", 1);
  q.add("q2", "d11", 1);
  EXPECT_DOUBLE_EQ(reciprocal_rank_at(run_of({ranking("q1", numbered(12))}), q).value, 1.0 / 3);
  EXPECT_DOUBLE_EQ(reciprocal_rank_at(run_of({ranking("q2", numbered(12))}), q).value, 0.0);
  const auto both = reciprocal_rank_at(run_of({ranking("q1", {"d3"}), ranking("q2", {"x", "y"})}), q);
  EXPECT_DOUBLE_EQ(both.value, 0.5);
  EXPECT_EQ(both.evaluated, 2u);
}

TEST(ReciprocalRank, MissingQueriesSkippedAndCounted) {
  Qrels q;
  q.add("q1", "d1", 1);
  const auto r = reciprocal_rank_at(run_of({ranking("q1", {"d1"}), ranking("qx", {"d1"})}), q);
  EXPECT_DOUBLE_EQ(r.value, 1.0);
  EXPECT_EQ(r.evaluated, 1u);
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_THROW(reciprocal_rank_at(run_of({}), q, 0), InvalidArgument);
}

TEST(Recall, Examples) {
  Qrels q;
  q.add("q", "a", 1);
  q.add("q", "b", 2);
  q.add("q", "n", 0);
  EXPECT_DOUBLE_EQ(recall_at(run_of({ranking("q", {"a", "x", "b"})}), q, 3).value, 1.0);
  EXPECT_DOUBLE_EQ(recall_at(run_of({ranking("q", {"a", "x", "b"})}), q, 2).value, 0.5);
  EXPECT_DOUBLE_EQ(recall_at(run_of({ranking("q", {"x", "y"})}), q, 2).value, 0.0);
  Qrels none;
  none.add("q", "n", 0);
  const auto r = recall_at(run_of({ranking("q", {"n"})}), none, 5);
  EXPECT_EQ(r.evaluated, 0u);
  EXPECT_EQ(r.skipped, 1u);
}

TEST(Ndcg, Examples) {
  Qrels q;
  q.add("q", "a", 1);
  EXPECT_DOUBLE_EQ(ndcg_at(run_of({ranking("q", {"a", "x"})}), q).value, 1.0);
  EXPECT_NEAR(ndcg_at(run_of({ranking("q", {"x", "a"})}), q).value, 1.0 / std::log2(3.0), 1e-12);
  Qrels g;
  g.add("q", "a", 3);
  g.add("q", "b", 1);
  const double expected = (1.0 + 7.0 / std::log2(3.0)) / (7.0 + 1.0 / std::log2(3.0));
  EXPECT_NEAR(ndcg_at(run_of({ranking("q", {"b", "a"})}), g).value, expected, 1e-12);
  Qrels zero;
  zero.add("q", "a", 0);
  EXPECT_DOUBLE_EQ(ndcg_at(run_of({ranking("q", {"a"})}), zero).value, 0.0);
}

TEST(Ndcg, LinearGain) {
  Qrels g;
  g.add("q", "a", 3);
  g.add("q", "b", 1);
  const double expected = (1.0 + 3.0 / std::log2(3.0)) / (3.0 + 1.0 / std::log2(3.0));
  EXPECT_NEAR(ndcg_at(run_of({ranking("q", {"b", "a"})}), g, 10, Gain::kLinear).value, expected,
              1e-12);
}

TEST(NdcgProperty, MatchesBruteForceOracle) {
  Xorshift64Star rng(21);
  for (int t = 0; t < 100; ++t) {
    std::map<std::string, int> judged;
    const auto pool = numbered(10);
    for (const auto& d : pool) {
      if (rng.uniform01() < 0.5) judged[d] = static_cast<int>(rng.bounded(4));
    }
    std::vector<std::string> ranked = pool;
    shuffle(std::span<std::string>(ranked), rng);
    ranked.resize(1 + rng.bounded(10));
    const std::size_t k = 1 + rng.bounded(10);
    std::vector<RankedDoc> docs;
    for (std::size_t i = 0; i < ranked.size(); ++i) docs.push_back({ranked[i], -static_cast<double>(i)});
    EXPECT_NEAR(ndcg(docs, judged, k), oracle_ndcg(ranked, judged, k), 1e-9);
  }
}

TEST(HitAccuracy, InclusiveCutoff) {
  AnswerSets a{{"q", {"d5"}}};
  const auto run = run_of({ranking("q", numbered(10))});
  EXPECT_DOUBLE_EQ(hit_accuracy_at(run, a, 5).value, 1.0);
  AnswerSets b{{"q", {"d6"}}};
  EXPECT_DOUBLE_EQ(hit_accuracy_at(run, b, 5).value, 0.0);
  EXPECT_DOUBLE_EQ(hit_accuracy_at(run, b, 20).value, 1.0);
  AnswerSets c{{"q", {"zz"}}};
  EXPECT_DOUBLE_EQ(hit_accuracy_at(run, c, 100).value, 0.0);
}

TEST(MetricProperty, BoundedAndMonotoneInK) {
  Xorshift64Star rng(4);
  for (int t = 0; t < 30; ++t) {
    Qrels q;
    std::vector<QueryRanking> rs;
    for (int i = 0; i < 5; ++i) {
      const std::string qid = "q" + std::to_string(i);
      auto docs = numbered(30);
      for (const auto& d : docs) if (rng.uniform01() < 0.15) q.add(qid, d, 1 + static_cast<int>(rng.bounded(3)));
      q.add(qid, "d999", 1);
      shuffle(std::span<std::string>(docs), rng);
      rs.push_back(ranking(qid, docs));
    }
    const auto run = run_of(rs);
    const auto answers = answer_sets_from(q);
    double prev_r = 0, prev_h = 0, prev_rr = 0;
    for (std::size_t k = 1; k <= 32; ++k) {
      const double r = recall_at(run, q, k).value;
      const double h = hit_accuracy_at(run, answers, k).value;
      const double rr = reciprocal_rank_at(run, q, k).value;
      const double n = ndcg_at(run, q, k).value;
      for (double v : {r, h, rr, n}) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
      EXPECT_GE(r, prev_r);
      EXPECT_GE(h, prev_h);
      EXPECT_GE(rr, prev_rr);
      prev_r = r;
      prev_h = h;
      prev_rr = rr;
    }
  }
}

TEST(MetricProperty, RunAgainstItselfHasFullRecall) {
  const auto run = run_of({ranking("a", numbered(7)), ranking("b", numbered(3, "x"))});
  Qrels q;
  for (const auto& r : run.queries) for (const auto& d : r.docs) q.add(r.query_id, d.doc_id, 1);
  EXPECT_DOUBLE_EQ(recall_at(run, q, 7).value, 1.0);
  EXPECT_DOUBLE_EQ(ndcg_at(run, q, 7).value, 1.0);
}

TEST(Qrels, RejectsNegativeGrades) {
  Qrels q;
  EXPECT_THROW(q.add("q", "d", -1), ValidationError);
}

TEST(RunFile, Validation) {
  auto r = run_of({ranking("q", {"a", "b"})});
  EXPECT_NO_THROW(r.validate());
  r.queries[0].docs[1].doc_id = "a";
  EXPECT_THROW(r.validate(), ValidationError);
  r = run_of({ranking("q", {"a", "b"})});
  r.queries[0].docs[1].score = 10;
  EXPECT_THROW(r.validate(), ValidationError);
}

TEST(MetricSpec, ParsesList) {
  const auto specs = parse_metric_list("rr@10,recall@1000,ndcg@10,hit@5");
  ASSERT_EQ(specs.size(), 4u);
  EXPECT_EQ(specs[0].kind, MetricSpec::Kind::kReciprocalRank);
  EXPECT_EQ(specs[1].k, 1000u);
  EXPECT_EQ(specs[2].kind, MetricSpec::Kind::kNdcg);
  EXPECT_EQ(specs[3].name, "hit@5");
  EXPECT_THROW(parse_metric_list("map@10"), InvalidArgument);
  EXPECT_THROW(parse_metric_list("rr@0"), InvalidArgument);
}

TEST(TrecFormats, RoundTrip) {
  Qrels q;
  q.add("q1", "d1", 2);
  q.add("q1", "d2", 0);
  q.add("q2", "d9", 1);
  EXPECT_EQ(parse_qrels(format_qrels(q)).judgments, q.judgments);

  RunFile r;
  r.tag = "t";
  r.queries.push_back({"q1", {{"d2", 1.0 / 3}, {"d1", -0.5}}});
  r.queries.push_back({"q2", {{"d9", 1e-300}}});
  const auto back = parse_run(format_run(r));
  ASSERT_EQ(back.queries.size(), 2u);
  EXPECT_EQ(back.tag, "t");
  EXPECT_EQ(back.queries[0].docs[0].score, 1.0 / 3);
  EXPECT_EQ(back.queries[0].docs[1].doc_id, "d1");
  EXPECT_EQ(back.queries[1].docs[0].score, 1e-300);
  EXPECT_EQ(format_run(back), format_run(r));
}

TEST(TrecFormats, Errors) {
  EXPECT_THROW(parse_qrels("q1 0 d1\n"), ParseError);
  EXPECT_THROW(parse_run("q1 Q0 d1 1 0.5\n"), ParseError);
  EXPECT_THROW(parse_run("q1 Q0 d1 2 0.5 t\n"), ValidationError);
  EXPECT_THROW(parse_run("q1 Q0 d1 1 0.5 t\nq1 Q0 d2 2 0.9 t\n"), ValidationError);
}
