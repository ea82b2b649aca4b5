#include "textagg/encoder.hpp"

#include <algorithm>
#include <cmath>

namespace textagg {
namespace {

Matrix<float> to_matrix(const NamedTensor& t) {
  if (t.dims.size() != 2) {
    throw InvalidArgument("tensor \"" + t.name + "\" must be rank 2");
  }
  return Matrix<float>(t.dims[0], t.dims[1], t.data);
}

std::vector<float> to_vector(const NamedTensor& t) {
  if (t.dims.size() != 1) {
    throw InvalidArgument("tensor \"" + t.name + "\" must be rank 1");
  }
  return t.data;
}

NamedTensor from_matrix(std::string name, const Matrix<float>& m) {
  return {std::move(name), {m.rows(), m.cols()}, m.storage()};
}

}  // namespace

std::vector<float> ClsProjection::apply(std::span<const float> cls_embedding) const {
  if (cls_embedding.size() != weight.rows()) {
    throw InvalidArgument("cls projection: input size " +
                          std::to_string(cls_embedding.size()) + " != " +
                          std::to_string(weight.rows()));
  }
  std::vector<double> acc(weight.cols(), 0.0);
  if (!bias.empty()) std::copy(bias.begin(), bias.end(), acc.begin());
  for (std::size_t k = 0; k < weight.rows(); ++k) {
    const double e = cls_embedding[k];
    const auto row = weight.row(k);
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += e * row[j];
  }
  return {acc.begin(), acc.end()};
}

bool EncoderConfig::uses_partition() const {
  const bool lexical = pooling_variant == PoolingVariant::kFull ||
                       pooling_variant == PoolingVariant::kUnitWeight ||
                       pooling_variant == PoolingVariant::kNoMlm;
  return d_agg > 0 && lexical && pruning_kind != PruningKind::kLinear;
}

void EncoderConfig::validate() const {
  if (max_query_len == 0 || max_passage_len == 0) {
    throw InvalidArgument("encoder config: maximum lengths must be >= 1");
  }
  if (dim() == 0) {
    throw InvalidArgument("encoder config: embedding would have zero dimensions");
  }
  if (pooling_variant == PoolingVariant::kRepBert && cls_dim() != 0) {
    throw InvalidArgument("encoder config: repbert pooling has no separate CLS part");
  }
}

std::string to_string(PoolingVariant v) {
  switch (v) {
    case PoolingVariant::kFull: return "full";
    case PoolingVariant::kUnitWeight: return "unit_weight";
    case PoolingVariant::kNoMlm: return "no_mlm";
    case PoolingVariant::kAverage: return "average";
    case PoolingVariant::kRepBert: return "repbert";
  }
  return "?";
}

std::string to_string(PruningKind k) {
  switch (k) {
    case PruningKind::kSemi: return "semi";
    case PruningKind::kFull: return "full";
    case PruningKind::kLinear: return "linear";
    case PruningKind::kMean: return "mean";
  }
  return "?";
}

PoolingVariant parse_pooling_variant(const std::string& name) {
  for (auto v : {PoolingVariant::kFull, PoolingVariant::kUnitWeight, PoolingVariant::kNoMlm,
                 PoolingVariant::kAverage, PoolingVariant::kRepBert}) {
    if (to_string(v) == name) return v;
  }
  throw InvalidArgument("unknown pooling variant \"" + name + "\"");
}

PruningKind parse_pruning_kind(const std::string& name) {
  for (auto k : {PruningKind::kSemi, PruningKind::kFull, PruningKind::kLinear,
                 PruningKind::kMean}) {
    if (to_string(k) == name) return k;
  }
  throw InvalidArgument("unknown pruning kind \"" + name + "\"");
}

EncoderHeads EncoderHeads::from_container(const TensorContainer& c) {
  EncoderHeads heads{MlmHead(to_matrix(c.at("mlm.weight")), to_vector(c.at("mlm.bias"))),
                     std::nullopt, std::nullopt, std::nullopt, std::nullopt};
  if (const auto* w = c.find("tw.weight")) {
    const auto& b = c.at("tw.bias");
    if (b.data.size() != 1) throw InvalidArgument("tensor \"tw.bias\" must hold one value");
    heads.term_weight.emplace(to_vector(*w), b.data[0]);
  }
  if (const auto* w = c.find("cls.weight")) {
    ClsProjection proj{to_matrix(*w), {}};
    if (const auto* b = c.find("cls.bias")) proj.bias = to_vector(*b);
    if (!proj.bias.empty() && proj.bias.size() != proj.weight.cols()) {
      throw InvalidArgument("tensor \"cls.bias\" does not match cls.weight columns");
    }
    heads.cls = std::move(proj);
  }
  if (const auto* w = c.find("linear.weight")) heads.linear = to_matrix(*w);
  if (const auto* w = c.find("avg.weight")) heads.average = to_matrix(*w);
  return heads;
}

void EncoderHeads::append_to(TensorContainer& c) const {
  c.add(from_matrix("mlm.weight", mlm.projection()));
  c.add({"mlm.bias", {mlm.vocab_size()}, {mlm.bias().begin(), mlm.bias().end()}});
  if (term_weight) {
    c.add({"tw.weight", {term_weight->weight.size()}, term_weight->weight});
    c.add({"tw.bias", {1}, {term_weight->bias}});
  }
  if (cls) {
    c.add(from_matrix("cls.weight", cls->weight));
    if (!cls->bias.empty()) c.add({"cls.bias", {cls->bias.size()}, cls->bias});
  }
  if (linear) c.add(from_matrix("linear.weight", *linear));
  if (average) c.add(from_matrix("avg.weight", *average));
}

std::vector<float> ConcatEmbedding::flatten() const {
  std::vector<float> out(cls_part);
  out.insert(out.end(), agg_part.values.begin(), agg_part.values.end());
  return out;
}

double similarity_cls(const ConcatEmbedding& q, const ConcatEmbedding& p) {
  return dot(std::span<const float>(q.cls_part), std::span<const float>(p.cls_part));
}

double similarity_agg(const ConcatEmbedding& q, const ConcatEmbedding& p) {
  return dot(std::span<const float>(q.agg_part.values),
             std::span<const float>(p.agg_part.values));
}

double similarity(const ConcatEmbedding& q, const ConcatEmbedding& p) {
  const auto a = q.flatten();
  const auto b = p.flatten();
  return dot(std::span<const float>(a), std::span<const float>(b));
}

ConcatEmbedding encode(const TokenEmbeddingSequence& seq, const EncoderHeads& heads,
                       const SlicePartition* partition, const EncoderConfig& cfg,
                       SequenceRole role) {
  cfg.validate();
  seq.validate(heads.mlm.vocab_size());
  const std::size_t max_len =
      role == SequenceRole::kQuery ? cfg.max_query_len : cfg.max_passage_len;
  if (seq.length() > max_len) {
    throw ValidationError("encode: sequence of length " + std::to_string(seq.length()) +
                          " exceeds maximum " + std::to_string(max_len));
  }

  ConcatEmbedding out;
  if (cfg.cls_dim() > 0) {
    if (!heads.cls) throw InvalidArgument("encode: config needs cls.weight");
    if (heads.cls->weight.cols() != cfg.d_cls) {
      throw InvalidArgument("encode: cls projection has " +
                            std::to_string(heads.cls->weight.cols()) +
                            " outputs, config expects " + std::to_string(cfg.d_cls));
    }
    out.cls_part = heads.cls->apply(seq.cls_embedding);
  }
  out.agg_part.kind =
      cfg.pruning_kind == PruningKind::kSemi || cfg.pruning_kind == PruningKind::kMean
          ? AggKind::kSemi
          : AggKind::kFull;
  if (cfg.d_agg == 0) return out;

  switch (cfg.pooling_variant) {
    case PoolingVariant::kAverage: {
      if (!heads.average) throw InvalidArgument("encode: config needs avg.weight");
      ClsProjection proj{*heads.average, {}};
      out.agg_part.values = proj.apply(mean_pool(seq, false, cfg.pooling));
      break;
    }
    case PoolingVariant::kRepBert: {
      out.agg_part.values = mean_pool(seq, true, cfg.pooling);
      break;
    }
    default: {
      if (cfg.pooling_variant != PoolingVariant::kUnitWeight && !heads.term_weight) {
        throw InvalidArgument("encode: config needs tw.weight and tw.bias");
      }
      const TermWeightHead unit({}, 0.0f);
      const auto lexical = weighted_max_pool(
          seq, heads.mlm, heads.term_weight ? *heads.term_weight : unit,
          cfg.pooling_variant, cfg.pooling);
      if (cfg.pruning_kind == PruningKind::kLinear) {
        if (!heads.linear) throw InvalidArgument("encode: config needs linear.weight");
        out.agg_part.values = prune_linear(lexical, *heads.linear);
        break;
      }
      if (partition == nullptr) throw InvalidArgument("encode: config needs a partition");
      if (partition->vocab_size() != heads.mlm.vocab_size()) {
        throw InvalidArgument("encode: partition vocabulary does not match the mlm head");
      }
      switch (cfg.pruning_kind) {
        case PruningKind::kSemi: out.agg_part = prune_semi(lexical, *partition).first; break;
        case PruningKind::kFull: out.agg_part = prune_full(lexical, *partition); break;
        case PruningKind::kMean: out.agg_part = prune_semi_mean(lexical, *partition); break;
        case PruningKind::kLinear: break;
      }
      out.partition = partition->fingerprint();
    }
  }
  if (out.agg_part.size() != cfg.d_agg) {
    throw InvalidArgument("encode: aggregated part has " +
                          std::to_string(out.agg_part.size()) +
                          " dimensions, config expects " + std::to_string(cfg.d_agg));
  }
  return out;
}

}  // namespace textagg
