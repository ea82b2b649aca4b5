#include "textagg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "textagg/binary_io.hpp"
#include "textagg/error.hpp"
#include "textagg/prng.hpp"
#include "textagg/toy_encoder.hpp"

namespace textagg {
namespace {

enum Stream : std::uint64_t { kIdOrder = 1, kDocs, kEvalQueries, kTrainQueries };

std::string padded(char prefix, std::size_t i, std::size_t count) {
  std::string digits = std::to_string(i);
  const std::size_t width = std::to_string(count > 0 ? count - 1 : 0).size();
  return std::string(1, prefix) + std::string(width - std::min(width, digits.size()), '0') +
         digits;
}

std::size_t length_between(Xorshift64Star& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.bounded(hi - lo + 1));
}

struct Generator {
  const SynthOptions& opt;
  std::vector<std::vector<std::uint32_t>> distinct;  // sorted distinct tokens per doc
  std::vector<double> idf;                           // by token id

  // Distinct tokens of `doc`, sampled without replacement with weight idf.
  TokenIds sample_query(std::size_t doc, Xorshift64Star& rng) const {
    std::vector<std::uint32_t> pool = distinct[doc];
    const std::size_t len =
        std::min(pool.size(), length_between(rng, opt.min_query_len, opt.max_query_len));
    TokenIds query;
    for (std::size_t k = 0; k < len; ++k) {
      double total = 0.0;
      for (auto t : pool) total += idf[t];
      double r = rng.uniform01() * total;
      std::size_t pick = pool.size() - 1;
      for (std::size_t i = 0; i < pool.size(); ++i) {
        r -= idf[pool[i]];
        if (r < 0.0) {
          pick = i;
          break;
        }
      }
      query.push_back(pool[pick]);
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    return query;
  }

  // Other documents ranked by idf-weighted overlap with the query.
  std::vector<std::size_t> negatives(const TokenIds& query, std::size_t positive) const {
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t d = 0; d < distinct.size(); ++d) {
      if (d == positive) continue;
      double s = 0.0;
      for (auto t : query) {
        if (std::binary_search(distinct[d].begin(), distinct[d].end(), t)) s += idf[t];
      }
      scored.emplace_back(-s, d);
    }
    const std::size_t n = std::min(opt.negatives, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n),
                      scored.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(scored[i].second);
    return out;
  }
};

}  // namespace

void SynthOptions::validate() const {
  if (docs < 2) throw InvalidArgument("synth: need at least 2 documents");
  if (queries > docs) throw InvalidArgument("synth: more evaluation queries than documents");
  if (vocab_size <= kToyFirstContentId + 1) throw InvalidArgument("synth: vocabulary too small");
  if (min_doc_len == 0 || min_doc_len > max_doc_len) {
    throw InvalidArgument("synth: need 1 <= min_doc_len <= max_doc_len");
  }
  if (min_query_len == 0 || min_query_len > max_query_len) {
    throw InvalidArgument("synth: need 1 <= min_query_len <= max_query_len");
  }
  if (negatives >= docs) throw InvalidArgument("synth: negatives must be fewer than documents");
  if (!(zipf_exponent >= 0.0)) throw InvalidArgument("synth: zipf exponent must be >= 0");
}

SynthTask make_synth_task(const SynthOptions& opt) {
  opt.validate();
  const std::size_t content = opt.vocab_size - kToyFirstContentId;

  // Rank r maps to a shuffled content id with probability proportional to
  // 1 / (r + 1)^s.
  std::vector<std::uint32_t> by_rank(content);
  std::iota(by_rank.begin(), by_rank.end(), kToyFirstContentId);
  Xorshift64Star order_rng(derive_seed(opt.seed, kIdOrder));
  shuffle(std::span<std::uint32_t>(by_rank), order_rng);
  std::vector<double> cumulative(content);
  double acc = 0.0;
  for (std::size_t r = 0; r < content; ++r) {
    acc += std::pow(static_cast<double>(r + 1), -opt.zipf_exponent);
    cumulative[r] = acc;
  }

  SynthTask task;
  Generator gen{opt, {}, std::vector<double>(opt.vocab_size, 0.0)};
  Xorshift64Star doc_rng(derive_seed(opt.seed, kDocs));
  std::vector<std::size_t> df(opt.vocab_size, 0);
  for (std::size_t d = 0; d < opt.docs; ++d) {
    CorpusDoc doc{padded('d', d, opt.docs), {}};
    const std::size_t len = length_between(doc_rng, opt.min_doc_len, opt.max_doc_len);
    for (std::size_t i = 0; i < len; ++i) {
      const double u = doc_rng.uniform01() * acc;
      const auto r = static_cast<std::size_t>(
          std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
      doc.token_ids.push_back(by_rank[std::min(r, content - 1)]);
    }
    auto distinct = doc.token_ids;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    for (auto t : distinct) ++df[t];
    gen.distinct.push_back(std::move(distinct));
    task.corpus.push_back(std::move(doc));
  }
  for (std::size_t t = 0; t < opt.vocab_size; ++t) {
    if (df[t] > 0) {
      gen.idf[t] = std::log((static_cast<double>(opt.docs) + 1.0) / static_cast<double>(df[t]));
    }
  }

  // Evaluation targets are distinct documents. Training targets are drawn
  // from the whole corpus; training queries are independent samples.
  std::vector<std::size_t> targets(opt.docs);
  std::iota(targets.begin(), targets.end(), std::size_t{0});
  Xorshift64Star eval_rng(derive_seed(opt.seed, kEvalQueries));
  shuffle(std::span<std::size_t>(targets), eval_rng);
  for (std::size_t i = 0; i < opt.queries; ++i) {
    const std::size_t doc = targets[i];
    CorpusDoc q{padded('q', i, opt.queries), gen.sample_query(doc, eval_rng)};
    task.qrels.add(q.id, task.corpus[doc].id, 1);
    task.queries.push_back(std::move(q));
  }

  Xorshift64Star train_rng(derive_seed(opt.seed, kTrainQueries));
  for (std::size_t i = 0; i < opt.train_queries; ++i) {
    const auto doc = static_cast<std::size_t>(train_rng.bounded(opt.docs));
    TrainingRecord rec;
    rec.query = gen.sample_query(doc, train_rng);
    rec.positive = task.corpus[doc].id;
    for (auto n : gen.negatives(rec.query, doc)) rec.negatives.push_back(task.corpus[n].id);
    task.train.push_back(std::move(rec));
  }
  return task;
}

void write_synth_task(const SynthTask& task, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  write_text_file(dir / "corpus.jsonl", format_corpus_jsonl(task.corpus));
  write_text_file(dir / "queries.jsonl", format_corpus_jsonl(task.queries));
  write_text_file(dir / "qrels.txt", format_qrels(task.qrels));
  write_text_file(dir / "train.jsonl", format_training_jsonl(task.train));
}

}  // namespace textagg
