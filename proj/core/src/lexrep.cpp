#include "textagg/lexrep.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace textagg {
namespace {

bool all_finite(std::span<const float> values) {
  return std::all_of(values.begin(), values.end(),
                     [](float x) { return std::isfinite(x); });
}

}  // namespace

void TokenEmbeddingSequence::validate(std::size_t vocab_size) const {
  if (embeddings.rows() != token_ids.size() ||
      special_mask.size() != token_ids.size()) {
    throw InvalidArgument("sequence: embeddings/token_ids/special_mask lengths differ");
  }
  if (cls_embedding.size() != embeddings.cols()) {
    throw InvalidArgument("sequence: cls_embedding size " +
                          std::to_string(cls_embedding.size()) +
                          " != d_model " + std::to_string(embeddings.cols()));
  }
  for (std::uint32_t id : token_ids) {
    if (id >= vocab_size) {
      throw InvalidArgument("sequence: token id " + std::to_string(id) +
                            " outside vocabulary of size " +
                            std::to_string(vocab_size));
    }
  }
}

MlmHead::MlmHead(Matrix<float> projection, std::vector<float> bias)
    : projection_(std::move(projection)), bias_(std::move(bias)) {
  if (projection_.cols() == 0 || projection_.rows() == 0) {
    throw InvalidArgument("mlm head: empty projection");
  }
  if (bias_.size() != projection_.cols()) {
    throw InvalidArgument("mlm head: bias size " + std::to_string(bias_.size()) +
                          " != vocab size " + std::to_string(projection_.cols()));
  }
  if (!all_finite(projection_.values()) || !all_finite(bias_)) {
    throw ValidationError("mlm head: non-finite weights");
  }
}

TermWeightHead::TermWeightHead(std::vector<float> w, float b)
    : weight(std::move(w)), bias(b) {
  if (!all_finite(weight) || !std::isfinite(bias)) {
    throw ValidationError("term weight head: non-finite weights");
  }
}

std::vector<float> mlm_project(std::span<const float> embedding,
                               const MlmHead& head) {
  if (embedding.size() != head.d_model()) {
    throw InvalidArgument("mlm_project: embedding size " +
                          std::to_string(embedding.size()) + " != d_model " +
                          std::to_string(head.d_model()));
  }
  const std::size_t vocab = head.vocab_size();
  std::vector<double> logits(head.bias().begin(), head.bias().end());
  for (std::size_t k = 0; k < embedding.size(); ++k) {
    const double e = embedding[k];
    if (e == 0.0) continue;
    const auto w = head.projection().row(k);
    for (std::size_t v = 0; v < vocab; ++v) logits[v] += e * w[v];
  }
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& x : logits) {
    x = std::exp(x - max_logit);
    total += x;
  }
  std::vector<float> probs(vocab);
  for (std::size_t v = 0; v < vocab; ++v) {
    probs[v] = static_cast<float>(logits[v] / total);
  }
  return probs;
}

float term_weight(std::span<const float> embedding, const TermWeightHead& head) {
  return static_cast<float>(
      std::abs(dot(embedding, std::span<const float>(head.weight)) + head.bias));
}

std::vector<std::size_t> poolable_positions(const TokenEmbeddingSequence& seq,
                                            const PoolingOptions& options) {
  std::vector<std::size_t> positions;
  positions.reserve(seq.length());
  for (std::size_t i = 0; i < seq.length(); ++i) {
    const bool sep_override =
        options.include_sep && seq.token_ids[i] == options.sep_token_id;
    if (!seq.special_mask[i] || sep_override) positions.push_back(i);
  }
  return positions;
}

LexicalVector weighted_max_pool(const TokenEmbeddingSequence& seq,
                                const MlmHead& mlm, const TermWeightHead& tw,
                                PoolingVariant variant,
                                const PoolingOptions& options) {
  if (variant != PoolingVariant::kFull && variant != PoolingVariant::kUnitWeight &&
      variant != PoolingVariant::kNoMlm) {
    throw InvalidArgument("weighted_max_pool: variant is not a lexical pooling");
  }
  seq.validate(mlm.vocab_size());
  if (seq.d_model() != mlm.d_model() ||
      (variant != PoolingVariant::kUnitWeight && tw.weight.size() != seq.d_model())) {
    throw InvalidArgument("weighted_max_pool: head dimensions do not match d_model " +
                          std::to_string(seq.d_model()));
  }
  const auto positions = poolable_positions(seq, options);
  if (positions.empty()) {
    throw EmptySequenceError("weighted_max_pool: every position is masked");
  }

  const std::size_t vocab = mlm.vocab_size();
  std::vector<double> pooled(vocab, 0.0);
  for (std::size_t i : positions) {
    const auto e = seq.embeddings.row(i);
    const double w =
        variant == PoolingVariant::kUnitWeight ? 1.0 : term_weight(e, tw);
    if (variant == PoolingVariant::kNoMlm) {
      double& slot = pooled[seq.token_ids[i]];
      slot = std::max(slot, w);
      continue;
    }
    const auto p = mlm_project(e, mlm);
    for (std::size_t v = 0; v < vocab; ++v) {
      pooled[v] = std::max(pooled[v], w * static_cast<double>(p[v]));
    }
  }
  LexicalVector out;
  out.values.assign(pooled.begin(), pooled.end());
  return out;
}

std::vector<float> mean_pool(const TokenEmbeddingSequence& seq,
                             bool include_cls, const PoolingOptions& options) {
  const auto positions = poolable_positions(seq, options);
  const std::size_t count = positions.size() + (include_cls ? 1 : 0);
  if (count == 0) throw EmptySequenceError("mean_pool: every position is masked");
  std::vector<double> sum(seq.d_model(), 0.0);
  for (std::size_t i : positions) {
    const auto e = seq.embeddings.row(i);
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += e[k];
  }
  if (include_cls) {
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += seq.cls_embedding[k];
  }
  std::vector<float> out(sum.size());
  for (std::size_t k = 0; k < sum.size(); ++k) {
    out[k] = static_cast<float>(sum[k] / static_cast<double>(count));
  }
  return out;
}

}  // namespace textagg
