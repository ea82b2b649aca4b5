#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace textagg {

// query id -> (doc id -> grade). Grades >= 1 count as relevant.
struct Qrels {
  std::map<std::string, std::map<std::string, int>> judgments;

  void add(const std::string& qid, const std::string& docid, int grade);
};

struct RankedDoc {
  std::string doc_id;
  double score = 0.0;
};

struct QueryRanking {
  std::string query_id;
  std::vector<RankedDoc> docs;  // rank 1 first
};

// Ranked lists in emission order.
struct RunFile {
  std::vector<QueryRanking> queries;
  std::string tag = "textagg";

  // Checks ids are unique per query and scores are non-increasing.
  void validate() const;
};

// query id -> answer-bearing doc ids.
using AnswerSets = std::map<std::string, std::set<std::string>>;
AnswerSets answer_sets_from(const Qrels& qrels);

enum class Gain { kExponential, kLinear };  // 2^g - 1, or g

struct MetricResult {
  double value = 0.0;      // macro average over evaluated queries
  std::size_t evaluated = 0;
  std::size_t skipped = 0;  // absent from judgments, or nothing to find
};

MetricResult reciprocal_rank_at(const RunFile& run, const Qrels& qrels,
                                std::size_t cutoff = 10);
MetricResult recall_at(const RunFile& run, const Qrels& qrels, std::size_t k);
MetricResult ndcg_at(const RunFile& run, const Qrels& qrels, std::size_t k = 10,
                     Gain gain = Gain::kExponential);
MetricResult hit_accuracy_at(const RunFile& run, const AnswerSets& answers,
                             std::size_t k);

// Per-query forms used by the aggregates above.
double reciprocal_rank(std::span<const RankedDoc> ranking,
                       const std::map<std::string, int>& judged, std::size_t cutoff);
double recall(std::span<const RankedDoc> ranking, const std::map<std::string, int>& judged,
              std::size_t k);
double ndcg(std::span<const RankedDoc> ranking, const std::map<std::string, int>& judged,
            std::size_t k, Gain gain = Gain::kExponential);

struct MetricSpec {
  enum class Kind { kReciprocalRank, kRecall, kNdcg, kHit } kind;
  std::size_t k;
  std::string name;  // as written, e.g. "ndcg@10"
};

// Comma-separated list such as "rr@10,recall@1000,ndcg@10,hit@5".
std::vector<MetricSpec> parse_metric_list(std::string_view list);
MetricResult evaluate(const MetricSpec& metric, const RunFile& run, const Qrels& qrels,
                      Gain gain = Gain::kExponential);

// TREC formats, whitespace separated:
//   qrels: qid 0 docid grade
//   run:   qid Q0 docid rank score tag
Qrels parse_qrels(std::string_view text);
std::string format_qrels(const Qrels& qrels);
RunFile parse_run(std::string_view text);
std::string format_run(const RunFile& run);

// Shortest decimal form that reads back to the same double.
std::string format_score(double score);

}  // namespace textagg
