#include "textagg/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "textagg/parallel.hpp"
#include "textagg/prng.hpp"

namespace textagg {
namespace {

// Sequences handled per parallel task. Fixed so the reduction order, and
// therefore every bit of the result, is independent of the worker count.
constexpr std::size_t kSequencesPerTask = 8;

struct Candidates {
  std::vector<const TokenIds*> sequences;  // queries first, then passages
  std::size_t query_count = 0;
  std::size_t group = 0;  // passages per query (1 + negatives)

  std::size_t passage_count() const { return sequences.size() - query_count; }
  std::size_t positive_of(std::size_t q) const { return q * group; }
};

Candidates collect(const TrainingBatch& batch) {
  batch.validate();
  Candidates c;
  c.query_count = batch.queries.size();
  c.group = 1 + batch.negatives_per_query();
  for (const auto& q : batch.queries) c.sequences.push_back(&q);
  for (std::size_t i = 0; i < batch.queries.size(); ++i) {
    c.sequences.push_back(&batch.positives[i]);
    for (const auto& n : batch.negatives[i]) c.sequences.push_back(&n);
  }
  return c;
}

std::vector<ToyTape> run_all(const Candidates& c, const ToyEncoder& encoder,
                             const SlicePartition* partition, unsigned threads) {
  std::vector<ToyTape> tapes(c.sequences.size());
  const std::size_t tasks = (tapes.size() + kSequencesPerTask - 1) / kSequencesPerTask;
  parallel_for(tasks, threads, [&](std::size_t task) {
    const std::size_t end = std::min(tapes.size(), (task + 1) * kSequencesPerTask);
    for (std::size_t s = task * kSequencesPerTask; s < end; ++s) {
      tapes[s] = encoder.run(*c.sequences[s], partition);
    }
  });
  return tapes;
}

double dot_d(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

// Row-softmax NLL over a [queries x passages] score matrix. Adds
// scale * d(loss)/d(score) into `grad` when it is non-null.
double score_loss(const std::vector<std::vector<double>>& scores, const Candidates& c,
                  double scale, std::vector<std::vector<double>>* grad) {
  double total = 0.0;
  const double inv_q = 1.0 / static_cast<double>(c.query_count);
  for (std::size_t q = 0; q < c.query_count; ++q) {
    const auto& row = scores[q];
    const std::size_t pos = c.positive_of(q);
    std::vector<double> negs;
    negs.reserve(row.size() - 1);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j != pos) negs.push_back(row[j]);
    }
    total += nll_loss(row[pos], negs);
    if (grad != nullptr) {
      const double mx = *std::max_element(row.begin(), row.end());
      double z = 0.0;
      for (double s : row) z += std::exp(s - mx);
      for (std::size_t j = 0; j < row.size(); ++j) {
        const double p = std::exp(row[j] - mx) / z;
        (*grad)[q][j] += scale * inv_q * (p - (j == pos ? 1.0 : 0.0));
      }
    }
  }
  return total * inv_q;
}

struct ScoreSet {
  std::vector<std::vector<double>> cls, agg;
};

ScoreSet score(const std::vector<ToyTape>& tapes, const Candidates& c) {
  ScoreSet s;
  s.cls.assign(c.query_count, std::vector<double>(c.passage_count(), 0.0));
  s.agg = s.cls;
  for (std::size_t q = 0; q < c.query_count; ++q) {
    for (std::size_t j = 0; j < c.passage_count(); ++j) {
      const auto& tq = tapes[q];
      const auto& tp = tapes[c.query_count + j];
      s.cls[q][j] = dot_d(tq.cls_part, tp.cls_part);
      s.agg[q][j] = dot_d(tq.agg_part, tp.agg_part);
    }
  }
  return s;
}

BatchLoss losses(const ScoreSet& s, const Candidates& c, const LossWeights& w,
                 std::vector<std::vector<double>>* g_cls,
                 std::vector<std::vector<double>>* g_agg) {
  std::vector<std::vector<double>> concat = s.cls;
  for (std::size_t q = 0; q < concat.size(); ++q) {
    for (std::size_t j = 0; j < concat[q].size(); ++j) concat[q][j] += s.agg[q][j];
  }
  BatchLoss out;
  std::vector<std::vector<double>> g_cat;
  if (g_cls != nullptr) {
    g_cat.assign(c.query_count, std::vector<double>(c.passage_count(), 0.0));
    *g_cls = g_cat;
    *g_agg = g_cat;
  }
  out.concat = score_loss(concat, c, 1.0, g_cls ? &g_cat : nullptr);
  out.agg = score_loss(s.agg, c, w.lambda1, g_agg);
  out.cls = score_loss(s.cls, c, w.lambda2, g_cls);
  out.total = out.concat + w.lambda1 * out.agg + w.lambda2 * out.cls;
  if (g_cls != nullptr) {
    for (std::size_t q = 0; q < c.query_count; ++q) {
      for (std::size_t j = 0; j < c.passage_count(); ++j) {
        (*g_cls)[q][j] += g_cat[q][j];
        (*g_agg)[q][j] += g_cat[q][j];
      }
    }
  }
  return out;
}

// Accumulates d(loss)/d(params) for one sequence into `g`, given the upstream
// gradients of its CLS and aggregated parts.
void backprop(const ToyEncoder& encoder, const ToyTape& t, const SlicePartition* partition,
              std::span<const double> d_cls, std::span<const double> d_agg,
              ParameterSet& g) {
  const auto& cfg = encoder.config().encoder;
  const auto& P = encoder.params();
  const std::size_t dm = encoder.config().d_model;
  const std::size_t vocab = encoder.config().vocab_size;
  const std::size_t rows = t.hidden.rows();
  Matrix<double> dh(rows, dm);

  if (!d_cls.empty()) {
    const auto& W = P[ParamId::kClsWeight];
    auto& gW = g[ParamId::kClsWeight];
    for (std::size_t k = 0; k < dm; ++k) {
      const double h = t.hidden(0, k);
      double acc = 0.0;
      for (std::size_t j = 0; j < d_cls.size(); ++j) {
        gW.at(k, j) += h * d_cls[j];
        acc += W.at(k, j) * d_cls[j];
      }
      dh(0, k) += acc;
    }
    auto& gb = g[ParamId::kClsBias].values;
    for (std::size_t j = 0; j < gb.size(); ++j) gb[j] += d_cls[j];
  }

  if (!d_agg.empty()) {
    std::vector<double> dv(vocab, 0.0);
    switch (cfg.pruning_kind) {
      case PruningKind::kLinear: {
        const auto& M = P[ParamId::kLinearWeight];
        auto& gM = g[ParamId::kLinearWeight];
        for (std::size_t u = 0; u < vocab; ++u) {
          const double v = t.lexical[u];
          double acc = 0.0;
          for (std::size_t n = 0; n < d_agg.size(); ++n) {
            gM.at(u, n) += v * d_agg[n];
            acc += M.at(u, n) * d_agg[n];
          }
          dv[u] = acc;
        }
        break;
      }
      case PruningKind::kMean: {
        for (std::size_t n = 0; n < d_agg.size(); ++n) {
          const auto members = partition->members(n);
          const double share = d_agg[n] / static_cast<double>(members.size());
          for (std::uint32_t u : members) dv[u] += share;
        }
        break;
      }
      case PruningKind::kSemi:
      case PruningKind::kFull: {
        for (std::size_t n = 0; n < d_agg.size(); ++n) {
          const std::uint32_t u = t.slice_ids[n];
          const double sign =
              cfg.pruning_kind == PruningKind::kFull && partition->sign_of()[u] < 0 ? -1.0
                                                                                    : 1.0;
          dv[u] += sign * d_agg[n];
        }
        break;
      }
    }

    const std::size_t npool = t.pooled.size();
    std::vector<double> dw(npool, 0.0);
    const bool no_mlm = cfg.pooling_variant == PoolingVariant::kNoMlm;
    std::vector<std::vector<std::pair<std::uint32_t, double>>> dp(no_mlm ? 0 : npool);
    for (std::size_t u = 0; u < vocab; ++u) {
      if (dv[u] == 0.0 || t.winner[u] == ToyTape::kNoWinner) continue;
      const std::uint32_t s = t.winner[u];
      if (no_mlm) {
        dw[s] += dv[u];
      } else {
        dw[s] += dv[u] * t.probs(s, u);
        dp[s].emplace_back(static_cast<std::uint32_t>(u), dv[u] * t.weight[s]);
      }
    }

    if (!no_mlm) {
      const auto& W = P[ParamId::kMlmWeight];
      auto& gW = g[ParamId::kMlmWeight];
      auto& gb = g[ParamId::kMlmBias].values;
      std::vector<double> dlogit(vocab);
      for (std::size_t s = 0; s < npool; ++s) {
        if (dp[s].empty()) continue;
        const auto p = t.probs.row(s);
        double inner = 0.0;
        for (const auto& [u, val] : dp[s]) inner += val * p[u];
        for (std::size_t u = 0; u < vocab; ++u) dlogit[u] = -inner * p[u];
        for (const auto& [u, val] : dp[s]) dlogit[u] += p[u] * val;
        const std::size_t row = t.pooled[s];
        for (std::size_t u = 0; u < vocab; ++u) gb[u] += dlogit[u];
        for (std::size_t k = 0; k < dm; ++k) {
          const double h = t.hidden(row, k);
          auto gw = gW.row(k);
          const auto w = W.row(k);
          double acc = 0.0;
          for (std::size_t u = 0; u < vocab; ++u) {
            gw[u] += h * dlogit[u];
            acc += w[u] * dlogit[u];
          }
          dh(row, k) += acc;
        }
      }
    }

    if (cfg.pooling_variant != PoolingVariant::kUnitWeight) {
      const auto tw = P[ParamId::kTermWeight].row(0);
      auto gtw = g[ParamId::kTermWeight].row(0);
      double& gtb = g[ParamId::kTermBias].values[0];
      for (std::size_t s = 0; s < npool; ++s) {
        if (dw[s] == 0.0) continue;
        const double ds = dw[s] * (t.pre_weight[s] >= 0.0 ? 1.0 : -1.0);
        const std::size_t row = t.pooled[s];
        gtb += ds;
        for (std::size_t k = 0; k < dm; ++k) {
          gtw[k] += t.hidden(row, k) * ds;
          dh(row, k) += tw[k] * ds;
        }
      }
    }
  }

  // Mixing layer: hidden = tanh(x A + context B + b).
  const auto& A = P[ParamId::kMixToken];
  const auto& B = P[ParamId::kMixContext];
  auto& gA = g[ParamId::kMixToken];
  auto& gB = g[ParamId::kMixContext];
  auto& gbias = g[ParamId::kMixBias].values;
  std::vector<double> dz_sum(dm, 0.0);
  Matrix<double> dx(rows, dm);
  std::vector<double> dz(dm);
  for (std::size_t i = 0; i < rows; ++i) {
    bool any = false;
    for (std::size_t j = 0; j < dm; ++j) {
      const double h = t.hidden(i, j);
      dz[j] = dh(i, j) * (1.0 - h * h);
      any = any || dz[j] != 0.0;
    }
    if (!any) continue;
    for (std::size_t j = 0; j < dm; ++j) dz_sum[j] += dz[j];
    for (std::size_t k = 0; k < dm; ++k) {
      const double xk = t.x(i, k);
      auto ga = gA.row(k);
      const auto a = A.row(k);
      double acc = 0.0;
      for (std::size_t j = 0; j < dm; ++j) {
        ga[j] += xk * dz[j];
        acc += a[j] * dz[j];
      }
      dx(i, k) = acc;
    }
  }
  std::vector<double> dc(dm, 0.0);
  for (std::size_t k = 0; k < dm; ++k) {
    auto gb = gB.row(k);
    const auto b = B.row(k);
    double acc = 0.0;
    for (std::size_t j = 0; j < dm; ++j) {
      gb[j] += t.context[k] * dz_sum[j];
      acc += b[j] * dz_sum[j];
    }
    dc[k] = acc / static_cast<double>(rows);
  }
  for (std::size_t j = 0; j < dm; ++j) gbias[j] += dz_sum[j];

  auto& gE = g[ParamId::kTokenEmbedding];
  auto& gP = g[ParamId::kPositionEmbedding];
  for (std::size_t i = 0; i < rows; ++i) {
    const std::uint32_t id = i == 0 ? kToyClsId : t.tokens[i - 1];
    auto ge = gE.row(id);
    auto gp = gP.row(i);
    for (std::size_t k = 0; k < dm; ++k) {
      const double d = dx(i, k) + dc[k];
      ge[k] += d;
      gp[k] += d;
    }
  }
}

}  // namespace

void TrainingBatch::validate() const {
  if (queries.empty()) throw InvalidArgument("training batch: no queries");
  if (positives.size() != queries.size() || negatives.size() != queries.size()) {
    throw InvalidArgument("training batch: need one positive and one negative list per query");
  }
  const std::size_t k = negatives.front().size();
  for (const auto& n : negatives) {
    if (n.size() != k) {
      throw InvalidArgument("training batch: negative count differs between queries");
    }
  }
}

double nll_loss(double pos_score, std::span<const double> neg_scores) {
  double mx = pos_score;
  for (double s : neg_scores) mx = std::max(mx, s);
  double z = std::exp(pos_score - mx);
  for (double s : neg_scores) z += std::exp(s - mx);
  return std::max(0.0, mx + std::log(z) - pos_score);
}

BatchLoss batch_loss(const TrainingBatch& batch, const ToyEncoder& encoder,
                     const SlicePartition* partition, const LossWeights& weights,
                     unsigned threads) {
  const Candidates c = collect(batch);
  const auto tapes = run_all(c, encoder, partition, threads);
  return losses(score(tapes, c), c, weights, nullptr, nullptr);
}

GradientResult compute_gradients(const TrainingBatch& batch, const ToyEncoder& encoder,
                                 const SlicePartition* partition,
                                 const LossWeights& weights, const ParamMask& trainable,
                                 unsigned threads) {
  const Candidates c = collect(batch);
  const auto tapes = run_all(c, encoder, partition, threads);
  std::vector<std::vector<double>> g_cls, g_agg;
  GradientResult out{losses(score(tapes, c), c, weights, &g_cls, &g_agg),
                     encoder.params().zeros_like()};

  // Upstream gradients for each sequence's CLS and aggregated parts.
  const std::size_t nseq = c.sequences.size();
  std::vector<std::vector<double>> d_cls(nseq), d_agg(nseq);
  for (std::size_t s = 0; s < nseq; ++s) {
    d_cls[s].assign(tapes[s].cls_part.size(), 0.0);
    d_agg[s].assign(tapes[s].agg_part.size(), 0.0);
  }
  for (std::size_t q = 0; q < c.query_count; ++q) {
    for (std::size_t j = 0; j < c.passage_count(); ++j) {
      const std::size_t p = c.query_count + j;
      const double gc = g_cls[q][j];
      const double ga = g_agg[q][j];
      for (std::size_t k = 0; k < d_cls[q].size(); ++k) {
        d_cls[q][k] += gc * tapes[p].cls_part[k];
        d_cls[p][k] += gc * tapes[q].cls_part[k];
      }
      for (std::size_t k = 0; k < d_agg[q].size(); ++k) {
        d_agg[q][k] += ga * tapes[p].agg_part[k];
        d_agg[p][k] += ga * tapes[q].agg_part[k];
      }
    }
  }

  const std::size_t tasks = (nseq + kSequencesPerTask - 1) / kSequencesPerTask;
  std::vector<ParameterSet> partial(tasks);
  parallel_for(tasks, threads, [&](std::size_t task) {
    partial[task] = out.grad;
    const std::size_t end = std::min(nseq, (task + 1) * kSequencesPerTask);
    for (std::size_t s = task * kSequencesPerTask; s < end; ++s) {
      backprop(encoder, tapes[s], partition, d_cls[s], d_agg[s], partial[task]);
    }
  });
  for (const auto& p : partial) out.grad.add_scaled(p, 1.0);

  std::size_t i = 0;
  for (auto& p : out.grad) {
    if (!trainable.trainable[i++]) std::fill(p.values.begin(), p.values.end(), 0.0);
  }
  return out;
}

TrainingBatch make_batch(const TrainingSet& data, std::span<const std::size_t> order,
                         std::size_t negatives_per_query) {
  TrainingBatch batch;
  for (std::size_t idx : order) {
    const auto& ex = data.examples.at(idx);
    if (ex.negatives.size() < negatives_per_query) {
      throw InvalidArgument("training example lists " + std::to_string(ex.negatives.size()) +
                            " negatives, batch needs " + std::to_string(negatives_per_query));
    }
    batch.queries.push_back(ex.query);
    batch.positives.push_back(data.documents.at(ex.positive));
    auto& negs = batch.negatives.emplace_back();
    for (std::size_t k = 0; k < negatives_per_query; ++k) {
      negs.push_back(data.documents.at(ex.negatives[k]));
    }
  }
  return batch;
}

TrainResult train(ToyEncoder encoder, const TrainingSet& data,
                  const SlicePartition* partition, const TrainOptions& options) {
  if (data.examples.empty()) throw InvalidArgument("train: dataset has no examples");
  if (options.batch_size == 0) throw InvalidArgument("train: batch size must be >= 1");
  for (const auto& ex : data.examples) {
    if (ex.negatives.size() < options.negatives_per_query) {
      throw InvalidArgument("train: an example has fewer than " +
                            std::to_string(options.negatives_per_query) + " negatives");
    }
  }

  TrainResult result{std::move(encoder), {}};
  ParameterSet velocity = result.encoder.params().zeros_like();
  std::vector<std::size_t> order(data.examples.size());
  const std::size_t batches_per_epoch =
      (order.size() + options.batch_size - 1) / options.batch_size;
  const std::size_t total_steps =
      options.max_steps.value_or(options.epochs * batches_per_epoch);

  std::size_t step = 0;
  for (std::size_t epoch = 0; step < total_steps; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Xorshift64Star rng(derive_seed(options.seed, epoch));
    shuffle(std::span<std::size_t>(order), rng);
    for (std::size_t b = 0; b < batches_per_epoch && step < total_steps; ++b, ++step) {
      const std::size_t first = b * options.batch_size;
      const std::size_t count = std::min(options.batch_size, order.size() - first);
      const TrainingBatch batch =
          make_batch(data, std::span(order).subspan(first, count), options.negatives_per_query);
      auto [loss, grad] = compute_gradients(batch, result.encoder, partition, options.weights,
                                            options.trainable, options.threads);
      if (options.max_grad_norm > 0.0) {
        double sq = 0.0;
        for (const auto& p : grad) {
          for (double x : p.values) sq += x * x;
        }
        const double norm = std::sqrt(sq);
        if (norm > options.max_grad_norm) {
          for (auto& p : grad) {
            for (double& x : p.values) x *= options.max_grad_norm / norm;
          }
        }
      }
      if (options.momentum > 0.0) {
        for (std::size_t i = 0; i < kParamCount; ++i) {
          auto& v = velocity[static_cast<ParamId>(i)].values;
          const auto& gi = grad[static_cast<ParamId>(i)].values;
          for (std::size_t k = 0; k < v.size(); ++k) v[k] = options.momentum * v[k] + gi[k];
        }
        result.encoder.params().add_scaled(velocity, -options.learning_rate);
      } else {
        result.encoder.params().add_scaled(grad, -options.learning_rate);
      }
      result.trace.push_back({step, epoch, loss});
    }
  }
  return result;
}

std::string loss_trace_csv(std::span<const StepRecord> trace) {
  std::string out = "step,epoch,total,concat,agg,cls\n";
  char line[160];
  for (const auto& r : trace) {
    std::snprintf(line, sizeof line, "%zu,%zu,%.10g,%.10g,%.10g,%.10g\n", r.step, r.epoch,
                  r.loss.total, r.loss.concat, r.loss.agg, r.loss.cls);
    out += line;
  }
  return out;
}

}  // namespace textagg
