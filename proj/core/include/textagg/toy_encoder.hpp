#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "textagg/encoder.hpp"
#include "textagg/lexrep.hpp"
#include "textagg/matrix.hpp"
#include "textagg/pruning.hpp"
#include "textagg/tensor_container.hpp"

namespace textagg {

// Reserved ids in the toy vocabulary.
inline constexpr std::uint32_t kToyPadId = 0;
inline constexpr std::uint32_t kToyClsId = 1;
inline constexpr std::uint32_t kToySepId = 2;
inline constexpr std::uint32_t kToyFirstContentId = 3;

enum class ParamId : std::size_t {
  kTokenEmbedding,     // [vocab x d_model]
  kPositionEmbedding,  // [max_positions x d_model]
  kMixToken,           // [d_model x d_model]
  kMixContext,         // [d_model x d_model]
  kMixBias,            // [1 x d_model]
  kMlmWeight,          // [d_model x vocab]
  kMlmBias,            // [1 x vocab]
  kTermWeight,         // [1 x d_model]
  kTermBias,           // [1 x 1]
  kClsWeight,          // [d_model x d_cls]
  kClsBias,            // [1 x d_cls], empty when the projection has no bias
  kLinearWeight,       // [vocab x d_agg], only for linear pruning
};
inline constexpr std::size_t kParamCount = 12;

struct Parameter {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
  std::span<double> row(std::size_t r) { return {values.data() + r * cols, cols}; }
};

// Fixed-layout collection of parameters; gradients share the layout.
class ParameterSet {
 public:
  Parameter& operator[](ParamId id) { return params_[static_cast<std::size_t>(id)]; }
  const Parameter& operator[](ParamId id) const {
    return params_[static_cast<std::size_t>(id)];
  }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  ParameterSet zeros_like() const;
  // this += scale * other
  void add_scaled(const ParameterSet& other, double scale);
  std::size_t total_size() const;
  bool operator==(const ParameterSet& other) const;

 private:
  std::array<Parameter, kParamCount> params_;
};

// Set of parameter groups; a cleared bit freezes the group.
struct ParamMask {
  std::array<bool, kParamCount> trainable{};

  static ParamMask all() {
    ParamMask m;
    m.trainable.fill(true);
    return m;
  }
  static ParamMask only(std::initializer_list<ParamId> ids) {
    ParamMask m;
    for (auto id : ids) m.trainable[static_cast<std::size_t>(id)] = true;
    return m;
  }
  bool operator[](ParamId id) const { return trainable[static_cast<std::size_t>(id)]; }
};

inline EncoderConfig toy_encoder_defaults() {
  EncoderConfig c;
  c.d_cls = 8;
  c.d_agg = 32;
  return c;
}

struct ToyEncoderConfig {
  std::size_t vocab_size = 128;
  std::size_t d_model = 16;
  std::size_t max_positions = 129;  // CLS plus the longest input
  double init_scale = 0.05;
  // Per-group override of init_scale. Draws are consumed either way, so an
  // override leaves every other group unchanged.
  std::array<std::optional<double>, kParamCount> group_init_scale{};
  std::uint64_t seed = 0;
  EncoderConfig encoder = toy_encoder_defaults();

  void validate() const;
};

// Everything computed by one forward pass, in double precision. Row 0 of `x`
// and `hidden` is the CLS position; rows 1..n hold the input tokens.
struct ToyTape {
  static constexpr std::uint32_t kNoWinner = std::numeric_limits<std::uint32_t>::max();

  std::vector<std::uint32_t> tokens;
  Matrix<double> x;                  // [(n+1) x d_model]
  std::vector<double> context;       // mean of x rows
  Matrix<double> hidden;             // tanh(x A + context B + b)
  std::vector<std::size_t> pooled;   // hidden rows that take part in pooling
  Matrix<double> probs;              // [pooled x vocab], empty for no_mlm
  std::vector<double> pre_weight;    // e . W + b per pooled row
  std::vector<double> weight;        // |pre_weight|, or 1 for unit weights
  std::vector<double> lexical;       // [vocab]
  std::vector<std::uint32_t> winner; // pooled slot that set lexical[u]
  std::vector<std::uint32_t> slice_ids;  // argmax per slice (semi/full)
  std::vector<double> cls_part;
  std::vector<double> agg_part;
};

// Minimal trainable encoder: token + position embeddings, one mixing layer
// that combines each position with the sequence mean, and the lexical heads.
// Queries and passages share all parameters.
class ToyEncoder {
 public:
  // Every parameter is drawn uniformly from [-scale, scale], group by group
  // in ParamId order.
  explicit ToyEncoder(const ToyEncoderConfig& config);

  const ToyEncoderConfig& config() const { return config_; }
  const ParameterSet& params() const { return params_; }
  ParameterSet& params() { return params_; }

  // Contextualized embeddings for `token_ids` (CLS is implicit).
  TokenEmbeddingSequence forward(std::span<const std::uint32_t> token_ids) const;

  // Full pipeline in double precision. `partition` may be null when the
  // config does not prune by slices.
  ToyTape run(std::span<const std::uint32_t> token_ids,
              const SlicePartition* partition) const;

  ConcatEmbedding embed(std::span<const std::uint32_t> token_ids,
                        const SlicePartition* partition) const;

  // f32 copies of the heads for the generic encode path.
  EncoderHeads heads() const;

  TensorContainer to_container() const;
  static ToyEncoder from_container(const TensorContainer& container);

 private:
  ToyEncoder(const ToyEncoderConfig& config, ParameterSet params);
  void check_tokens(std::span<const std::uint32_t> token_ids) const;
  void mix(std::span<const std::uint32_t> token_ids, Matrix<double>& x,
           std::vector<double>& context, Matrix<double>& hidden) const;

  ToyEncoderConfig config_;
  ParameterSet params_;
};

bool is_toy_special(std::uint32_t id);

std::string_view param_name(ParamId id);
// Accepts the stored name, or for toy.* groups the part after "toy.".
ParamId parse_param_id(std::string_view name);

}  // namespace textagg
