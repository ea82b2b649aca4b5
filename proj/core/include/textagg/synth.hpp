#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "textagg/eval.hpp"
#include "textagg/io_formats.hpp"

namespace textagg {

// Synthetic retrieval task where relevance is lexical overlap. Documents draw
// content tokens from a Zipf law over a shuffled id order. Each query is a
// handful of distinct tokens sampled from one target document, favouring
// rare (high idf) tokens; the target is the only relevant document. Training
// negatives are the documents with the highest idf-weighted overlap.
struct SynthOptions {
  std::size_t docs = 256;
  std::size_t queries = 64;         // evaluation queries, distinct targets
  std::size_t train_queries = 512;  // training examples over all documents
  std::size_t vocab_size = 256;     // includes the reserved toy ids
  std::size_t min_doc_len = 16;
  std::size_t max_doc_len = 32;
  std::size_t min_query_len = 3;
  std::size_t max_query_len = 6;
  std::size_t negatives = 7;
  double zipf_exponent = 1.0;
  std::uint64_t seed = 0;

  void validate() const;  // throws InvalidArgument
};

struct SynthTask {
  std::vector<CorpusDoc> corpus;
  std::vector<CorpusDoc> queries;  // evaluation queries
  Qrels qrels;                     // for the evaluation queries
  std::vector<TrainingRecord> train;
};

SynthTask make_synth_task(const SynthOptions& options);

// corpus.jsonl, queries.jsonl, qrels.txt, train.jsonl
void write_synth_task(const SynthTask& task, const std::filesystem::path& dir);

}  // namespace textagg
