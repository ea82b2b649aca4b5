#include "textagg/toy_encoder.hpp"

#include <algorithm>
#include <cmath>

#include "textagg/prng.hpp"

namespace textagg {
namespace {

constexpr const char* kParamNames[kParamCount] = {
    "toy.token_embedding", "toy.position_embedding", "toy.mix_token",
    "toy.mix_context",     "toy.mix_bias",           "mlm.weight",
    "mlm.bias",            "tw.weight",              "tw.bias",
    "cls.weight",          "cls.bias",               "linear.weight",
};

// Layout of the "toy.config" tensor. Values are small integers, exact in f32.
enum ConfigSlot : std::size_t {
  kCfgVocab, kCfgDModel, kCfgMaxPositions, kCfgDCls, kCfgDAgg, kCfgPooling,
  kCfgPruning, kCfgIncludeCls, kCfgClsBias, kCfgMaxQuery, kCfgMaxPassage, kCfgSlots
};

ParameterSet shaped_params(const ToyEncoderConfig& c) {
  const auto& e = c.encoder;
  const std::size_t shapes[kParamCount][2] = {
      {c.vocab_size, c.d_model},
      {c.max_positions, c.d_model},
      {c.d_model, c.d_model},
      {c.d_model, c.d_model},
      {1, c.d_model},
      {c.d_model, c.vocab_size},
      {1, c.vocab_size},
      {1, c.d_model},
      {1, 1},
      {c.d_model, e.cls_dim()},
      {e.cls_bias && e.cls_dim() > 0 ? 1u : 0u, e.cls_dim()},
      {e.pruning_kind == PruningKind::kLinear ? c.vocab_size : 0, e.d_agg},
  };
  ParameterSet set;
  std::size_t i = 0;
  for (auto& p : set) {
    p.name = kParamNames[i];
    p.rows = shapes[i][0];
    p.cols = shapes[i][1];
    p.values.assign(p.rows * p.cols, 0.0);
    ++i;
  }
  return set;
}

}  // namespace

std::string_view param_name(ParamId id) { return kParamNames[static_cast<std::size_t>(id)]; }

ParamId parse_param_id(std::string_view name) {
  for (std::size_t i = 0; i < kParamCount; ++i) {
    const std::string_view full = kParamNames[i];
    if (name == full || (full.starts_with("toy.") && name == full.substr(4))) {
      return static_cast<ParamId>(i);
    }
  }
  throw InvalidArgument("unknown parameter group \"" + std::string(name) + "\"");
}

bool is_toy_special(std::uint32_t id) {
  return id == kToyPadId || id == kToyClsId || id == kToySepId;
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out = *this;
  for (auto& p : out) std::fill(p.values.begin(), p.values.end(), 0.0);
  return out;
}

void ParameterSet::add_scaled(const ParameterSet& other, double scale) {
  for (std::size_t i = 0; i < kParamCount; ++i) {
    auto& dst = params_[i].values;
    const auto& src = other.params_[i].values;
    if (dst.size() != src.size()) throw InvalidArgument("parameter layout mismatch");
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += scale * src[k];
  }
}

std::size_t ParameterSet::total_size() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.values.size();
  return n;
}

bool ParameterSet::operator==(const ParameterSet& other) const {
  for (std::size_t i = 0; i < kParamCount; ++i) {
    if (params_[i].rows != other.params_[i].rows ||
        params_[i].cols != other.params_[i].cols ||
        params_[i].values != other.params_[i].values) {
      return false;
    }
  }
  return true;
}

void ToyEncoderConfig::validate() const {
  encoder.validate();
  if (vocab_size <= kToyFirstContentId || d_model == 0 || max_positions < 2) {
    throw InvalidArgument("toy encoder: vocab must exceed the reserved ids, "
                          "d_model >= 1, max_positions >= 2");
  }
  const auto bad_scale = [](double x) { return !std::isfinite(x) || x < 0.0; };
  if (bad_scale(init_scale) ||
      std::any_of(group_init_scale.begin(), group_init_scale.end(),
                  [&](const auto& g) { return g && bad_scale(*g); })) {
    throw InvalidArgument("toy encoder: init scales must be finite and >= 0");
  }
  const auto v = encoder.pooling_variant;
  if (v == PoolingVariant::kAverage || v == PoolingVariant::kRepBert) {
    throw InvalidArgument("toy encoder: only lexical pooling variants are trainable");
  }
}

ToyEncoder::ToyEncoder(const ToyEncoderConfig& config)
    : config_(config), params_(shaped_params(config)) {
  config_.validate();
  Xorshift64Star rng(config_.seed);
  for (std::size_t g = 0; g < kParamCount; ++g) {
    const double scale = config_.group_init_scale[g].value_or(config_.init_scale);
    for (double& x : params_[static_cast<ParamId>(g)].values) x = rng.uniform(-scale, scale);
  }
}

ToyEncoder::ToyEncoder(const ToyEncoderConfig& config, ParameterSet params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
}

void ToyEncoder::check_tokens(std::span<const std::uint32_t> token_ids) const {
  if (token_ids.size() + 1 > config_.max_positions) {
    throw InvalidArgument("toy encoder: input of length " +
                          std::to_string(token_ids.size()) + " exceeds " +
                          std::to_string(config_.max_positions - 1) + " tokens");
  }
  for (std::uint32_t id : token_ids) {
    if (id >= config_.vocab_size) {
      throw InvalidArgument("toy encoder: token id " + std::to_string(id) +
                            " outside vocabulary of size " +
                            std::to_string(config_.vocab_size));
    }
  }
}

void ToyEncoder::mix(std::span<const std::uint32_t> token_ids, Matrix<double>& x,
                     std::vector<double>& context, Matrix<double>& hidden) const {
  const std::size_t dm = config_.d_model;
  const std::size_t rows = token_ids.size() + 1;
  const auto& P = params_;
  x = Matrix<double>(rows, dm);
  for (std::size_t i = 0; i < rows; ++i) {
    const std::uint32_t id = i == 0 ? kToyClsId : token_ids[i - 1];
    const auto tok = P[ParamId::kTokenEmbedding].row(id);
    const auto pos = P[ParamId::kPositionEmbedding].row(i);
    for (std::size_t k = 0; k < dm; ++k) x(i, k) = tok[k] + pos[k];
  }
  context.assign(dm, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t k = 0; k < dm; ++k) context[k] += x(i, k);
  }
  for (double& c : context) c /= static_cast<double>(rows);

  std::vector<double> ctx_term(P[ParamId::kMixBias].values);
  for (std::size_t k = 0; k < dm; ++k) {
    const auto b = P[ParamId::kMixContext].row(k);
    for (std::size_t j = 0; j < dm; ++j) ctx_term[j] += context[k] * b[j];
  }
  hidden = Matrix<double>(rows, dm);
  std::vector<double> z(dm);
  for (std::size_t i = 0; i < rows; ++i) {
    std::copy(ctx_term.begin(), ctx_term.end(), z.begin());
    for (std::size_t k = 0; k < dm; ++k) {
      const auto a = P[ParamId::kMixToken].row(k);
      const double xi = x(i, k);
      for (std::size_t j = 0; j < dm; ++j) z[j] += xi * a[j];
    }
    for (std::size_t j = 0; j < dm; ++j) hidden(i, j) = std::tanh(z[j]);
  }
}

ToyTape ToyEncoder::run(std::span<const std::uint32_t> token_ids,
                        const SlicePartition* partition) const {
  check_tokens(token_ids);
  const auto& cfg = config_.encoder;
  const std::size_t dm = config_.d_model;
  const std::size_t vocab = config_.vocab_size;
  const std::size_t rows = token_ids.size() + 1;
  const auto& P = params_;

  ToyTape t;
  t.tokens.assign(token_ids.begin(), token_ids.end());

  mix(token_ids, t.x, t.context, t.hidden);

  // CLS projection.
  if (cfg.cls_dim() > 0) {
    const auto& W = P[ParamId::kClsWeight];
    t.cls_part.assign(cfg.cls_dim(), 0.0);
    if (!P[ParamId::kClsBias].values.empty()) t.cls_part = P[ParamId::kClsBias].values;
    for (std::size_t k = 0; k < dm; ++k) {
      const double h = t.hidden(0, k);
      const auto w = W.row(k);
      for (std::size_t j = 0; j < t.cls_part.size(); ++j) t.cls_part[j] += h * w[j];
    }
  }
  if (cfg.d_agg == 0) return t;

  // Weighted max pooling over non-special positions.
  for (std::size_t i = 1; i < rows; ++i) {
    const std::uint32_t id = token_ids[i - 1];
    const bool sep_override = cfg.pooling.include_sep && id == kToySepId;
    if (!is_toy_special(id) || sep_override) t.pooled.push_back(i);
  }
  if (t.pooled.empty()) throw EmptySequenceError("toy encoder: every position is masked");

  const std::size_t npool = t.pooled.size();
  const bool unit = cfg.pooling_variant == PoolingVariant::kUnitWeight;
  const bool no_mlm = cfg.pooling_variant == PoolingVariant::kNoMlm;
  t.pre_weight.assign(npool, 0.0);
  t.weight.assign(npool, 1.0);
  if (!unit) {
    const auto tw = P[ParamId::kTermWeight].row(0);
    const double tb = P[ParamId::kTermBias].values[0];
    for (std::size_t s = 0; s < npool; ++s) {
      double acc = tb;
      const auto h = t.hidden.row(t.pooled[s]);
      for (std::size_t k = 0; k < dm; ++k) acc += h[k] * tw[k];
      t.pre_weight[s] = acc;
      t.weight[s] = std::abs(acc);
    }
  }

  t.lexical.assign(vocab, 0.0);
  t.winner.assign(vocab, ToyTape::kNoWinner);
  if (no_mlm) {
    for (std::size_t s = 0; s < npool; ++s) {
      const std::uint32_t u = token_ids[t.pooled[s] - 1];
      if (t.winner[u] == ToyTape::kNoWinner || t.weight[s] > t.lexical[u]) {
        t.lexical[u] = t.weight[s];
        t.winner[u] = static_cast<std::uint32_t>(s);
      }
    }
  } else {
    t.probs = Matrix<double>(npool, vocab);
    const auto& W = P[ParamId::kMlmWeight];
    const auto& b = P[ParamId::kMlmBias].values;
    for (std::size_t s = 0; s < npool; ++s) {
      auto p = t.probs.row(s);
      std::copy(b.begin(), b.end(), p.begin());
      const auto h = t.hidden.row(t.pooled[s]);
      for (std::size_t k = 0; k < dm; ++k) {
        const auto w = W.row(k);
        const double hk = h[k];
        for (std::size_t u = 0; u < vocab; ++u) p[u] += hk * w[u];
      }
      const double mx = *std::max_element(p.begin(), p.end());
      double total = 0.0;
      for (double& x : p) {
        x = std::exp(x - mx);
        total += x;
      }
      for (double& x : p) x /= total;
      for (std::size_t u = 0; u < vocab; ++u) {
        const double val = t.weight[s] * p[u];
        if (s == 0 || val > t.lexical[u]) {
          t.lexical[u] = val;
          t.winner[u] = static_cast<std::uint32_t>(s);
        }
      }
    }
  }

  // Pruning.
  if (cfg.pruning_kind == PruningKind::kLinear) {
    const auto& M = P[ParamId::kLinearWeight];
    t.agg_part.assign(cfg.d_agg, 0.0);
    for (std::size_t u = 0; u < vocab; ++u) {
      const double v = t.lexical[u];
      if (v == 0.0) continue;
      const auto m = M.row(u);
      for (std::size_t n = 0; n < cfg.d_agg; ++n) t.agg_part[n] += v * m[n];
    }
    return t;
  }
  if (partition == nullptr) throw InvalidArgument("toy encoder: config needs a partition");
  if (partition->vocab_size() != vocab || partition->d() != cfg.d_agg) {
    throw InvalidArgument("toy encoder: partition shape does not match the config");
  }
  t.agg_part.assign(cfg.d_agg, 0.0);
  if (cfg.pruning_kind == PruningKind::kMean) {
    for (std::size_t n = 0; n < cfg.d_agg; ++n) {
      const auto members = partition->members(n);
      double sum = 0.0;
      for (std::uint32_t u : members) sum += t.lexical[u];
      t.agg_part[n] = sum / static_cast<double>(members.size());
    }
    return t;
  }
  t.slice_ids = slice_argmax(std::span<const double>(t.lexical), *partition).ids;
  for (std::size_t n = 0; n < cfg.d_agg; ++n) {
    const std::uint32_t u = t.slice_ids[n];
    const double sign =
        cfg.pruning_kind == PruningKind::kFull && partition->sign_of()[u] < 0 ? -1.0 : 1.0;
    t.agg_part[n] = sign * t.lexical[u];
  }
  return t;
}

TokenEmbeddingSequence ToyEncoder::forward(std::span<const std::uint32_t> token_ids) const {
  check_tokens(token_ids);
  Matrix<double> x;
  std::vector<double> context;
  Matrix<double> hidden;
  mix(token_ids, x, context, hidden);

  const std::size_t dm = config_.d_model;
  TokenEmbeddingSequence seq;
  seq.embeddings = Matrix<float>(token_ids.size(), dm);
  seq.cls_embedding.resize(dm);
  seq.token_ids.assign(token_ids.begin(), token_ids.end());
  seq.special_mask.resize(token_ids.size());
  for (std::size_t j = 0; j < dm; ++j) seq.cls_embedding[j] = static_cast<float>(hidden(0, j));
  for (std::size_t i = 0; i < token_ids.size(); ++i) {
    for (std::size_t j = 0; j < dm; ++j) {
      seq.embeddings(i, j) = static_cast<float>(hidden(i + 1, j));
    }
    seq.special_mask[i] = is_toy_special(token_ids[i]) ? 1 : 0;
  }
  return seq;
}

ConcatEmbedding ToyEncoder::embed(std::span<const std::uint32_t> token_ids,
                                  const SlicePartition* partition) const {
  const ToyTape t = run(token_ids, partition);
  const auto& cfg = config_.encoder;
  ConcatEmbedding out;
  out.cls_part.assign(t.cls_part.begin(), t.cls_part.end());
  out.agg_part.values.assign(t.agg_part.begin(), t.agg_part.end());
  out.agg_part.kind = cfg.pruning_kind == PruningKind::kSemi ||
                              cfg.pruning_kind == PruningKind::kMean
                          ? AggKind::kSemi
                          : AggKind::kFull;
  if (cfg.uses_partition() && partition != nullptr) out.partition = partition->fingerprint();
  return out;
}

namespace {

Matrix<float> to_float(const Parameter& p) {
  return Matrix<float>(p.rows, p.cols, std::vector<float>(p.values.begin(), p.values.end()));
}

}  // namespace

EncoderHeads ToyEncoder::heads() const {
  const auto& P = params_;
  EncoderHeads h{MlmHead(to_float(P[ParamId::kMlmWeight]),
                         {P[ParamId::kMlmBias].values.begin(), P[ParamId::kMlmBias].values.end()}),
                 TermWeightHead({P[ParamId::kTermWeight].values.begin(),
                                 P[ParamId::kTermWeight].values.end()},
                                static_cast<float>(P[ParamId::kTermBias].values[0])),
                 std::nullopt, std::nullopt, std::nullopt};
  if (config_.encoder.cls_dim() > 0) {
    const auto& b = P[ParamId::kClsBias].values;
    h.cls = ClsProjection{to_float(P[ParamId::kClsWeight]), {b.begin(), b.end()}};
  }
  if (!P[ParamId::kLinearWeight].values.empty()) h.linear = to_float(P[ParamId::kLinearWeight]);
  return h;
}

TensorContainer ToyEncoder::to_container() const {
  const auto& c = config_;
  const auto& e = c.encoder;
  std::vector<float> meta(kCfgSlots);
  meta[kCfgVocab] = static_cast<float>(c.vocab_size);
  meta[kCfgDModel] = static_cast<float>(c.d_model);
  meta[kCfgMaxPositions] = static_cast<float>(c.max_positions);
  meta[kCfgDCls] = static_cast<float>(e.d_cls);
  meta[kCfgDAgg] = static_cast<float>(e.d_agg);
  meta[kCfgPooling] = static_cast<float>(e.pooling_variant);
  meta[kCfgPruning] = static_cast<float>(e.pruning_kind);
  meta[kCfgIncludeCls] = e.include_cls ? 1.0f : 0.0f;
  meta[kCfgClsBias] = e.cls_bias ? 1.0f : 0.0f;
  meta[kCfgMaxQuery] = static_cast<float>(e.max_query_len);
  meta[kCfgMaxPassage] = static_cast<float>(e.max_passage_len);

  TensorContainer out;
  out.add({"toy.config", {kCfgSlots}, std::move(meta)});
  for (const auto& p : params_) {
    if (p.values.empty()) continue;
    std::vector<std::uint64_t> dims{p.rows, p.cols};
    if (p.rows == 1) dims = {p.cols};
    out.add({p.name, dims, std::vector<float>(p.values.begin(), p.values.end())});
  }
  return out;
}

ToyEncoder ToyEncoder::from_container(const TensorContainer& container) {
  const auto& meta = container.at("toy.config").data;
  if (meta.size() != kCfgSlots) throw InvalidArgument("toy.config has the wrong length");
  auto as_size = [&](ConfigSlot s) { return static_cast<std::size_t>(meta[s]); };
  ToyEncoderConfig c;
  c.vocab_size = as_size(kCfgVocab);
  c.d_model = as_size(kCfgDModel);
  c.max_positions = as_size(kCfgMaxPositions);
  c.encoder.d_cls = as_size(kCfgDCls);
  c.encoder.d_agg = as_size(kCfgDAgg);
  c.encoder.pooling_variant = static_cast<PoolingVariant>(as_size(kCfgPooling));
  c.encoder.pruning_kind = static_cast<PruningKind>(as_size(kCfgPruning));
  c.encoder.include_cls = meta[kCfgIncludeCls] != 0.0f;
  c.encoder.cls_bias = meta[kCfgClsBias] != 0.0f;
  c.encoder.max_query_len = as_size(kCfgMaxQuery);
  c.encoder.max_passage_len = as_size(kCfgMaxPassage);

  ParameterSet params = shaped_params(c);
  for (auto& p : params) {
    if (p.values.empty()) continue;
    const auto& t = container.at(p.name);
    if (t.data.size() != p.values.size()) {
      throw SizeMismatchError("tensor \"" + p.name + "\" has " +
                              std::to_string(t.data.size()) + " values, expected " +
                              std::to_string(p.values.size()));
    }
    p.values.assign(t.data.begin(), t.data.end());
  }
  return ToyEncoder(c, std::move(params));
}

}  // namespace textagg
