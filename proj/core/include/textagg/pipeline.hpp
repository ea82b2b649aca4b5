#pragma once

#include <span>
#include <string>

#include "textagg/eval.hpp"
#include "textagg/index.hpp"
#include "textagg/io_formats.hpp"
#include "textagg/toy_encoder.hpp"

namespace textagg {

// Encodes every document with the toy encoder.
VectorSet embed_corpus(const ToyEncoder& encoder, const SlicePartition* partition,
                       std::span<const CorpusDoc> docs, unsigned threads = 1);

// Top-k search for every query vector, in input order.
RunFile search_all(const FlatIndex& index, const VectorSet& queries, std::size_t k,
                   unsigned threads = 1, const std::string& tag = "textagg");

FlatIndex build_index(const VectorSet& vectors);

// Encode corpus and queries, search, and return the run.
RunFile retrieve(const ToyEncoder& encoder, const SlicePartition* partition,
                 std::span<const CorpusDoc> corpus, std::span<const CorpusDoc> queries,
                 std::size_t k, unsigned threads = 1);

}  // namespace textagg
