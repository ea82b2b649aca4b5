#include "textagg/pipeline.hpp"

#include "textagg/parallel.hpp"

namespace textagg {

VectorSet embed_corpus(const ToyEncoder& encoder, const SlicePartition* partition,
                       std::span<const CorpusDoc> docs, unsigned threads) {
  std::vector<ConcatEmbedding> embedded(docs.size());
  parallel_for(docs.size(), threads, [&](std::size_t i) {
    embedded[i] = encoder.embed(docs[i].token_ids, partition);
  });
  VectorSet set;
  const auto& cfg = encoder.config().encoder;
  set.dim = static_cast<std::uint32_t>(cfg.dim());
  set.d_cls = static_cast<std::uint32_t>(cfg.cls_dim());
  set.partition = partition != nullptr && cfg.uses_partition() ? partition->fingerprint()
                                                               : kNoPartition;
  set.vectors = Matrix<float>(0, set.dim);
  for (std::size_t i = 0; i < docs.size(); ++i) set.add(docs[i].id, embedded[i]);
  return set;
}

FlatIndex build_index(const VectorSet& vectors) {
  return FlatIndex::build_raw(vectors.dim, vectors.partition, vectors.ids, vectors.vectors);
}

RunFile search_all(const FlatIndex& index, const VectorSet& queries, std::size_t k,
                   unsigned threads, const std::string& tag) {
  RunFile run;
  run.tag = tag;
  run.queries.resize(queries.size());
  const auto search_one = [&](std::size_t i) {
    auto& q = run.queries[i];
    q.query_id = queries.ids[i];
    for (auto& hit : index.search(queries.embedding(i), k)) {
      q.docs.push_back({std::move(hit.id), hit.score});
    }
  };
  parallel_for(queries.size(), threads, search_one);
  return run;
}

RunFile retrieve(const ToyEncoder& encoder, const SlicePartition* partition,
                 std::span<const CorpusDoc> corpus, std::span<const CorpusDoc> queries,
                 std::size_t k, unsigned threads) {
  const FlatIndex index = build_index(embed_corpus(encoder, partition, corpus, threads));
  return search_all(index, embed_corpus(encoder, partition, queries, threads), k, threads);
}

}  // namespace textagg
