#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "textagg/matrix.hpp"

namespace textagg {

// Contextualized token embeddings for one tokenized text, as produced by an
// encoder's final layer. The CLS embedding travels separately; `embeddings`
// rows correspond one-to-one with `token_ids` and `special_mask`.
struct TokenEmbeddingSequence {
  Matrix<float> embeddings;  // [length x d_model]
  std::vector<std::uint32_t> token_ids;
  std::vector<std::uint8_t> special_mask;  // 1 = CLS/SEP/padding
  std::vector<float> cls_embedding;        // [d_model]

  std::size_t length() const { return token_ids.size(); }
  std::size_t d_model() const { return embeddings.cols(); }

  // Throws InvalidArgument on inconsistent shapes or ids >= vocab_size.
  void validate(std::size_t vocab_size) const;
};

// Masked-language-model projection: logits = e * projection + bias.
class MlmHead {
 public:
  MlmHead(Matrix<float> projection, std::vector<float> bias);

  std::size_t d_model() const { return projection_.rows(); }
  std::size_t vocab_size() const { return projection_.cols(); }
  const Matrix<float>& projection() const { return projection_; }
  std::span<const float> bias() const { return bias_; }

 private:
  Matrix<float> projection_;  // [d_model x vocab_size]
  std::vector<float> bias_;   // [vocab_size]
};

// Per-token importance: w = |e . weight + bias|.
struct TermWeightHead {
  TermWeightHead(std::vector<float> weight, float bias);

  std::vector<float> weight;
  float bias = 0.0f;
};

// Vocabulary-sized nonnegative term weights.
struct LexicalVector {
  std::vector<float> values;

  std::size_t size() const { return values.size(); }
  std::span<const float> view() const { return values; }
};

enum class PoolingVariant {
  kFull,        // w_i * softmax projection
  kUnitWeight,  // w_i forced to 1
  kNoMlm,       // one-hot indicator of the token id instead of the projection
  kAverage,     // mean of non-special embeddings, projected linearly
  kRepBert,     // mean of all embeddings including CLS, used as the vector
};

struct PoolingOptions {
  // Pool positions holding `sep_token_id` even though they are masked.
  bool include_sep = false;
  std::uint32_t sep_token_id = 102;
};

// softmax(e * W + b) with max-logit subtraction, double accumulation.
std::vector<float> mlm_project(std::span<const float> embedding,
                               const MlmHead& head);

float term_weight(std::span<const float> embedding, const TermWeightHead& head);

// result[v] = max_i w_i * p_i[v] over poolable positions. Only kFull,
// kUnitWeight and kNoMlm are lexical variants; others throw InvalidArgument.
// Throws EmptySequenceError when every position is masked.
LexicalVector weighted_max_pool(const TokenEmbeddingSequence& seq,
                                const MlmHead& mlm, const TermWeightHead& tw,
                                PoolingVariant variant,
                                const PoolingOptions& options = {});

// Mean of embeddings. With include_cls the CLS embedding joins the average.
std::vector<float> mean_pool(const TokenEmbeddingSequence& seq,
                             bool include_cls,
                             const PoolingOptions& options = {});

// Positions that participate in pooling.
std::vector<std::size_t> poolable_positions(const TokenEmbeddingSequence& seq,
                                            const PoolingOptions& options = {});

}  // namespace textagg
