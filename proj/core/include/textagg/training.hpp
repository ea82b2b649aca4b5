#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "textagg/pruning.hpp"
#include "textagg/toy_encoder.hpp"

namespace textagg {

using TokenIds = std::vector<std::uint32_t>;

// One contrastive batch. Every query has exactly one positive and the same
// number of negatives. Candidates for each query are all passages in the
// batch: its own positive and negatives plus every other query's.
struct TrainingBatch {
  std::vector<TokenIds> queries;
  std::vector<TokenIds> positives;
  std::vector<std::vector<TokenIds>> negatives;

  void validate() const;  // throws InvalidArgument
  std::size_t negatives_per_query() const {
    return negatives.empty() ? 0 : negatives.front().size();
  }
};

struct LossWeights {
  double lambda1 = 0.5;  // aggregated-part loss
  double lambda2 = 0.5;  // CLS-part loss
};

// -log(exp(pos) / (exp(pos) + sum exp(neg))) via log-sum-exp.
double nll_loss(double pos_score, std::span<const double> neg_scores);

struct BatchLoss {
  double total = 0.0;
  double concat = 0.0;
  double agg = 0.0;
  double cls = 0.0;
};

// Mean over queries of the concatenated, aggregated-only and CLS-only NLL
// losses; total = concat + lambda1 * agg + lambda2 * cls.
BatchLoss batch_loss(const TrainingBatch& batch, const ToyEncoder& encoder,
                     const SlicePartition* partition, const LossWeights& weights,
                     unsigned threads = 1);

struct GradientResult {
  BatchLoss loss;
  ParameterSet grad;
};

// Analytic gradient of batch_loss().total. Max pooling routes the gradient to
// the winning position (ties go to the earliest position or the lowest
// vocabulary index, matching the forward pass). Frozen groups get zeros.
GradientResult compute_gradients(const TrainingBatch& batch, const ToyEncoder& encoder,
                                 const SlicePartition* partition,
                                 const LossWeights& weights,
                                 const ParamMask& trainable = ParamMask::all(),
                                 unsigned threads = 1);

// Training data over a document store; examples reference documents by index.
struct TrainingExample {
  TokenIds query;
  std::uint32_t positive = 0;
  std::vector<std::uint32_t> negatives;
};

struct TrainingSet {
  std::vector<std::string> document_ids;
  std::vector<TokenIds> documents;
  std::vector<TrainingExample> examples;
};

struct TrainOptions {
  std::size_t epochs = 3;
  std::optional<std::size_t> max_steps;  // overrides epochs when set
  double learning_rate = 5e-6;
  double momentum = 0.0;
  double max_grad_norm = 0.0;  // 0 disables clipping
  std::size_t batch_size = 8;
  std::size_t negatives_per_query = 7;
  std::uint64_t seed = 0;
  LossWeights weights;
  ParamMask trainable = ParamMask::all();
  unsigned threads = 1;
};

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  BatchLoss loss;
};

struct TrainResult {
  ToyEncoder encoder;
  std::vector<StepRecord> trace;
};

// Plain SGD with optional momentum over seeded shuffles of the examples.
TrainResult train(ToyEncoder encoder, const TrainingSet& data,
                  const SlicePartition* partition, const TrainOptions& options);

// Batch assembled from examples[order[first .. first + count)].
TrainingBatch make_batch(const TrainingSet& data, std::span<const std::size_t> order,
                         std::size_t negatives_per_query);

std::string loss_trace_csv(std::span<const StepRecord> trace);

}  // namespace textagg
