#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "textagg/lexrep.hpp"
#include "textagg/matrix.hpp"
#include "textagg/pruning.hpp"
#include "textagg/tensor_container.hpp"

namespace textagg {

// Linear map from the CLS embedding to the low-dimensional CLS part.
struct ClsProjection {
  Matrix<float> weight;      // [d_model x d_cls]
  std::vector<float> bias;   // [d_cls] or empty for no bias

  std::vector<float> apply(std::span<const float> cls_embedding) const;
};

enum class PruningKind { kSemi, kFull, kLinear, kMean };

enum class SequenceRole { kQuery, kPassage };

struct EncoderConfig {
  std::size_t d_cls = 128;
  std::size_t d_agg = 640;
  std::size_t max_query_len = 32;
  std::size_t max_passage_len = 128;
  PoolingVariant pooling_variant = PoolingVariant::kFull;
  PruningKind pruning_kind = PruningKind::kFull;
  bool include_cls = true;
  bool cls_bias = true;
  PoolingOptions pooling;

  std::size_t cls_dim() const { return include_cls ? d_cls : 0; }
  std::size_t dim() const { return cls_dim() + d_agg; }
  // Lexical pooling followed by slice pruning needs a partition of d_agg slices.
  bool uses_partition() const;

  void validate() const;  // throws InvalidArgument
};

std::string to_string(PoolingVariant v);
std::string to_string(PruningKind k);
PoolingVariant parse_pooling_variant(const std::string& name);
PruningKind parse_pruning_kind(const std::string& name);

// Every learned piece the encoder might need. Optional members are required
// only by the configurations that read them.
struct EncoderHeads {
  MlmHead mlm;
  std::optional<TermWeightHead> term_weight;
  std::optional<ClsProjection> cls;
  std::optional<Matrix<float>> linear;   // [vocab_size x d_agg]
  std::optional<Matrix<float>> average;  // [d_model x d_agg]

  // Tensor names: mlm.weight, mlm.bias, tw.weight, tw.bias, cls.weight,
  // cls.bias, linear.weight, avg.weight. Only the mlm tensors are mandatory.
  static EncoderHeads from_container(const TensorContainer& container);
  void append_to(TensorContainer& container) const;
};

// Retrieval unit: projected CLS vector followed by the aggregated vector.
struct ConcatEmbedding {
  std::vector<float> cls_part;
  AggVector agg_part;
  Fingerprint partition{};  // kNoPartition when none was used

  std::size_t dim() const { return cls_part.size() + agg_part.size(); }
  std::vector<float> flatten() const;
};

double similarity_cls(const ConcatEmbedding& q, const ConcatEmbedding& p);
double similarity_agg(const ConcatEmbedding& q, const ConcatEmbedding& p);
// Dot product of the concatenated vectors.
double similarity(const ConcatEmbedding& q, const ConcatEmbedding& p);

// Builds the retrieval vector for one sequence. `partition` may be null when
// cfg.uses_partition() is false.
ConcatEmbedding encode(const TokenEmbeddingSequence& seq, const EncoderHeads& heads,
                       const SlicePartition* partition, const EncoderConfig& cfg,
                       SequenceRole role = SequenceRole::kPassage);

}  // namespace textagg
