#include "textagg/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <set>
#include <sstream>
#include <unordered_map>

#include "textagg/error.hpp"

namespace textagg {
namespace {

double gain_of(int grade, Gain gain) {
  return gain == Gain::kExponential ? std::exp2(static_cast<double>(grade)) - 1.0
                                    : static_cast<double>(grade);
}

std::size_t relevant_count(const std::map<std::string, int>& judged) {
  return static_cast<std::size_t>(std::count_if(
      judged.begin(), judged.end(), [](const auto& kv) { return kv.second >= 1; }));
}

int grade_of(const std::map<std::string, int>& judged, const std::string& docid) {
  const auto it = judged.find(docid);
  return it == judged.end() ? 0 : it->second;
}

template <class PerQuery>
MetricResult average(const RunFile& run, const Qrels& qrels, PerQuery&& per_query) {
  MetricResult out;
  double sum = 0.0;
  for (const auto& q : run.queries) {
    const auto it = qrels.judgments.find(q.query_id);
    if (it == qrels.judgments.end()) {
      ++out.skipped;
      continue;
    }
    const auto value = per_query(q.docs, it->second);
    if (!value) {
      ++out.skipped;
      continue;
    }
    sum += *value;
    ++out.evaluated;
  }
  out.value = out.evaluated == 0 ? 0.0 : sum / static_cast<double>(out.evaluated);
  return out;
}

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) fields.emplace_back(line.substr(start, i - start));
  }
  return fields;
}

template <class T>
T parse_number(const std::string& field, const char* what, std::size_t line_no) {
  T value{};
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError(std::string(what) + " on line " + std::to_string(line_no) +
                     " is not a number: \"" + field + "\"");
  }
  return value;
}

template <class Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    const auto fields = split_ws(line);
    if (!fields.empty()) fn(fields, line_no);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
}

}  // namespace

void Qrels::add(const std::string& qid, const std::string& docid, int grade) {
  if (grade < 0) {
    throw ValidationError("qrels: negative grade for " + qid + "/" + docid);
  }
  judgments[qid][docid] = grade;
}

void RunFile::validate() const {
  for (const auto& q : queries) {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < q.docs.size(); ++i) {
      if (!seen.insert(q.docs[i].doc_id).second) {
        throw ValidationError("run: query " + q.query_id + " lists " + q.docs[i].doc_id +
                              " twice");
      }
      if (i > 0 && q.docs[i].score > q.docs[i - 1].score) {
        throw ValidationError("run: query " + q.query_id + " has increasing scores at rank " +
                              std::to_string(i + 1));
      }
    }
  }
}

AnswerSets answer_sets_from(const Qrels& qrels) {
  AnswerSets out;
  for (const auto& [qid, judged] : qrels.judgments) {
    auto& set = out[qid];
    for (const auto& [docid, grade] : judged) {
      if (grade >= 1) set.insert(docid);
    }
  }
  return out;
}

double reciprocal_rank(std::span<const RankedDoc> ranking,
                       const std::map<std::string, int>& judged, std::size_t cutoff) {
  const std::size_t n = std::min(cutoff, ranking.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (grade_of(judged, ranking[i].doc_id) >= 1) return 1.0 / static_cast<double>(i + 1);
  }
  return 0.0;
}

double recall(std::span<const RankedDoc> ranking, const std::map<std::string, int>& judged,
              std::size_t k) {
  const std::size_t relevant = relevant_count(judged);
  if (relevant == 0) return 0.0;
  const std::size_t n = std::min(k, ranking.size());
  std::size_t found = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (grade_of(judged, ranking[i].doc_id) >= 1) ++found;
  }
  return static_cast<double>(found) / static_cast<double>(relevant);
}

double ndcg(std::span<const RankedDoc> ranking, const std::map<std::string, int>& judged,
            std::size_t k, Gain gain) {
  const std::size_t n = std::min(k, ranking.size());
  double dcg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int g = grade_of(judged, ranking[i].doc_id);
    if (g > 0) dcg += gain_of(g, gain) / std::log2(static_cast<double>(i + 2));
  }
  std::vector<int> grades;
  for (const auto& [docid, g] : judged) {
    if (g > 0) grades.push_back(g);
  }
  std::sort(grades.begin(), grades.end(), std::greater<>());
  double ideal = 0.0;
  for (std::size_t i = 0; i < std::min(k, grades.size()); ++i) {
    ideal += gain_of(grades[i], gain) / std::log2(static_cast<double>(i + 2));
  }
  return ideal > 0.0 ? dcg / ideal : 0.0;
}

MetricResult reciprocal_rank_at(const RunFile& run, const Qrels& qrels, std::size_t cutoff) {
  if (cutoff == 0) throw InvalidArgument("rr: cutoff must be >= 1");
  return average(run, qrels, [&](const auto& docs, const auto& judged) {
    return std::optional<double>(reciprocal_rank(docs, judged, cutoff));
  });
}

MetricResult recall_at(const RunFile& run, const Qrels& qrels, std::size_t k) {
  if (k == 0) throw InvalidArgument("recall: k must be >= 1");
  return average(run, qrels, [&](const auto& docs, const auto& judged) -> std::optional<double> {
    if (relevant_count(judged) == 0) return std::nullopt;
    return recall(docs, judged, k);
  });
}

MetricResult ndcg_at(const RunFile& run, const Qrels& qrels, std::size_t k, Gain gain) {
  if (k == 0) throw InvalidArgument("ndcg: k must be >= 1");
  return average(run, qrels, [&](const auto& docs, const auto& judged) {
    return std::optional<double>(ndcg(docs, judged, k, gain));
  });
}

MetricResult hit_accuracy_at(const RunFile& run, const AnswerSets& answers, std::size_t k) {
  if (k == 0) throw InvalidArgument("hit: k must be >= 1");
  MetricResult out;
  std::size_t hits = 0;
  for (const auto& q : run.queries) {
    const auto it = answers.find(q.query_id);
    if (it == answers.end()) {
      ++out.skipped;
      continue;
    }
    ++out.evaluated;
    const std::size_t n = std::min(k, q.docs.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (it->second.contains(q.docs[i].doc_id)) {
        ++hits;
        break;
      }
    }
  }
  out.value = out.evaluated == 0 ? 0.0
                                 : static_cast<double>(hits) / static_cast<double>(out.evaluated);
  return out;
}

std::vector<MetricSpec> parse_metric_list(std::string_view list) {
  std::vector<MetricSpec> specs;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const std::size_t comma = list.find(',', pos);
    const std::string item(list.substr(pos, comma == std::string_view::npos ? std::string_view::npos
                                                                           : comma - pos));
    pos = comma == std::string_view::npos ? list.size() + 1 : comma + 1;
    if (item.empty()) continue;
    const std::size_t at = item.find('@');
    if (at == std::string::npos) throw InvalidArgument("metric \"" + item + "\" needs @k");
    const std::string base = item.substr(0, at);
    std::size_t k = 0;
    const auto [ptr, ec] = std::from_chars(item.data() + at + 1, item.data() + item.size(), k);
    if (ec != std::errc() || ptr != item.data() + item.size() || k == 0) {
      throw InvalidArgument("metric \"" + item + "\" has an invalid cutoff");
    }
    MetricSpec::Kind kind;
    if (base == "rr" || base == "mrr") {
      kind = MetricSpec::Kind::kReciprocalRank;
    } else if (base == "recall" || base == "r") {
      kind = MetricSpec::Kind::kRecall;
    } else if (base == "ndcg") {
      kind = MetricSpec::Kind::kNdcg;
    } else if (base == "hit") {
      kind = MetricSpec::Kind::kHit;
    } else {
      throw InvalidArgument("unknown metric \"" + base + "\"");
    }
    specs.push_back({kind, k, item});
  }
  if (specs.empty()) throw InvalidArgument("no metrics requested");
  return specs;
}

MetricResult evaluate(const MetricSpec& metric, const RunFile& run, const Qrels& qrels, Gain gain) {
  switch (metric.kind) {
    case MetricSpec::Kind::kReciprocalRank: return reciprocal_rank_at(run, qrels, metric.k);
    case MetricSpec::Kind::kRecall: return recall_at(run, qrels, metric.k);
    case MetricSpec::Kind::kNdcg: return ndcg_at(run, qrels, metric.k, gain);
    case MetricSpec::Kind::kHit: return hit_accuracy_at(run, answer_sets_from(qrels), metric.k);
  }
  return {};
}

Qrels parse_qrels(std::string_view text) {
  Qrels qrels;
  for_each_line(text, [&](const std::vector<std::string>& f, std::size_t line_no) {
    if (f.size() != 4) {
      throw ParseError("qrels line " + std::to_string(line_no) + ": expected 4 columns, got " +
                       std::to_string(f.size()));
    }
    qrels.add(f[0], f[2], parse_number<int>(f[3], "grade", line_no));
  });
  return qrels;
}

std::string format_qrels(const Qrels& qrels) {
  std::string out;
  for (const auto& [qid, judged] : qrels.judgments) {
    for (const auto& [docid, grade] : judged) {
      out += qid + " 0 " + docid + " " + std::to_string(grade) + "\n";
    }
  }
  return out;
}

RunFile parse_run(std::string_view text) {
  struct Row {
    std::size_t rank;
    RankedDoc doc;
  };
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<Row>> rows;
  std::string tag;
  for_each_line(text, [&](const std::vector<std::string>& f, std::size_t line_no) {
    if (f.size() != 6) {
      throw ParseError("run line " + std::to_string(line_no) + ": expected 6 columns, got " +
                       std::to_string(f.size()));
    }
    auto [it, inserted] = rows.try_emplace(f[0]);
    if (inserted) order.push_back(f[0]);
    it->second.push_back({parse_number<std::size_t>(f[3], "rank", line_no),
                          {f[2], parse_number<double>(f[4], "score", line_no)}});
    if (tag.empty()) tag = f[5];
  });
  RunFile run;
  if (!tag.empty()) run.tag = tag;
  for (const auto& qid : order) {
    auto& list = rows[qid];
    std::stable_sort(list.begin(), list.end(),
                     [](const Row& a, const Row& b) { return a.rank < b.rank; });
    QueryRanking q{qid, {}};
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (list[i].rank != i + 1) {
        throw ValidationError("run: ranks for query " + qid + " are not dense from 1");
      }
      q.docs.push_back(std::move(list[i].doc));
    }
    run.queries.push_back(std::move(q));
  }
  run.validate();
  return run;
}

std::string format_score(double score) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, score);
  return std::string(buf, ptr);
}

std::string format_run(const RunFile& run) {
  std::string out;
  for (const auto& q : run.queries) {
    for (std::size_t i = 0; i < q.docs.size(); ++i) {
      out += q.query_id;
      out += " Q0 ";
      out += q.docs[i].doc_id;
      out += ' ';
      out += std::to_string(i + 1);
      out += ' ';
      out += format_score(q.docs[i].score);
      out += ' ';
      out += run.tag;
      out += '\n';
    }
  }
  return out;
}

}  // namespace textagg
