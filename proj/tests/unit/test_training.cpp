#include <gtest/gtest.h>

#include <cmath>

#include "textagg/error.hpp"
#include "textagg/prng.hpp"
#include "textagg/synth.hpp"
#include "textagg/training.hpp"

using namespace textagg;

namespace {

ToyEncoderConfig grad_config(PruningKind kind, std::uint64_t seed = 3) {
  ToyEncoderConfig c;
  c.seed = seed;
  c.init_scale = 0.5;
  c.encoder.pruning_kind = kind;
  return c;
}

TrainingBatch random_batch(std::uint64_t seed, std::size_t queries = 3) {
  Xorshift64Star rng(seed);
  auto seq = [&](std::size_t n) {
    TokenIds t;
    for (std::size_t i = 0; i < n; ++i) t.push_back(static_cast<std::uint32_t>(3 + rng.bounded(125)));
    return t;
  };
  TrainingBatch b;
  for (std::size_t q = 0; q < queries; ++q) {
    b.queries.push_back(seq(4));
    b.positives.push_back(seq(8));
    b.negatives.push_back({seq(7), seq(6)});
  }
  return b;
}

// Relative L2 error between analytic and central-difference gradients over
// sampled coordinates of every group. Coordinates whose difference quotient
// changes between step sizes sit near a max-pooling kink and are skipped.
double max_group_error(ToyEncoder enc, const TrainingBatch& b, const SlicePartition* part) {
  const LossWeights w;
  const auto g = compute_gradients(b, enc, part, w);
  Xorshift64Star rng(11);
  double worst = 0.0;
  for (std::size_t pi = 0; pi < kParamCount; ++pi) {
    const auto id = static_cast<ParamId>(pi);
    auto& p = enc.params()[id];
    if (p.values.empty()) continue;
    double num = 0.0, den = 0.0;
    for (int k = 0; k < 15; ++k) {
      const auto idx = rng.bounded(p.values.size());
      const double orig = p.values[idx];
      auto fd = [&](double h) {
        p.values[idx] = orig + h;
        const double lp = batch_loss(b, enc, part, w).total;
        p.values[idx] = orig - h;
        const double lm = batch_loss(b, enc, part, w).total;
        p.values[idx] = orig;
        return (lp - lm) / (2 * h);
      };
      const double f1 = fd(1e-5), f2 = fd(1e-4);
      if (std::abs(f1 - f2) > 1e-5 * (1 + std::abs(f1))) continue;
      const double an = g.grad[id].values[idx];
      num += (f1 - an) * (f1 - an);
      den += f1 * f1 + an * an;
    }
    if (den > 0) worst = std::max(worst, std::sqrt(num / den));
  }
  return worst;
}

}  // namespace

TEST(NllLoss, Examples) {
  EXPECT_NEAR(nll_loss(0, std::vector<double>{0, 0}), std::log(3.0), 1e-12);
  EXPECT_NEAR(nll_loss(std::log(3.0), std::vector<double>{0}), -std::log(0.75), 1e-12);
  EXPECT_NEAR(nll_loss(0, std::vector<double>{}), 0.0, 1e-15);
  EXPECT_NEAR(nll_loss(1e4, std::vector<double>{0, 1}), 0.0, 1e-15);
  EXPECT_TRUE(std::isfinite(nll_loss(-1e4, std::vector<double>{1e4})));
}

TEST(NllLoss, ShiftInvariant) {
  Xorshift64Star rng(1);
  for (int t = 0; t < 50; ++t) {
    const double pos = rng.uniform(-5, 5);
    std::vector<double> neg{rng.uniform(-5, 5), rng.uniform(-5, 5)};
    const double c = rng.uniform(-100, 100);
    std::vector<double> shifted{neg[0] + c, neg[1] + c};
    EXPECT_NEAR(nll_loss(pos, neg), nll_loss(pos + c, shifted), 1e-9);
  }
}

TEST(BatchLoss, TotalCombinesParts) {
  const auto enc = ToyEncoder(grad_config(PruningKind::kFull));
  const auto part = make_partition(128, 32, 1);
  const auto b = random_batch(5);
  const auto l = batch_loss(b, enc, &part, LossWeights{});
  EXPECT_NEAR(l.total, l.concat + 0.5 * l.agg + 0.5 * l.cls, 1e-12);
  const auto l0 = batch_loss(b, enc, &part, LossWeights{0, 0});
  EXPECT_NEAR(l0.total, l0.concat, 1e-15);
  BatchLoss hand{0, 1, 2, 4};
  EXPECT_DOUBLE_EQ(hand.concat + 0.5 * hand.agg + 0.5 * hand.cls, 4.0);
}

TEST(BatchLoss, EqualScoresGiveLnCandidates) {
  // Zero parameters make every score equal. One query, one negative: the
  // candidates are the positive and the negative.
  auto cfg = grad_config(PruningKind::kFull);
  cfg.init_scale = 0.0;
  const ToyEncoder enc(cfg);
  const auto part = make_partition(128, 32, 1);
  TrainingBatch b;
  b.queries = {{5, 6}};
  b.positives = {{7, 8}};
  b.negatives = {{{9, 10}}};
  EXPECT_NEAR(batch_loss(b, enc, &part, LossWeights{}).concat, std::log(2.0), 1e-12);
}

TEST(TrainingBatch, Validation) {
  TrainingBatch empty;
  EXPECT_THROW(empty.validate(), InvalidArgument);
  auto b = random_batch(1);
  b.negatives[1].pop_back();
  EXPECT_THROW(b.validate(), InvalidArgument);
}

TEST(Gradients, MatchFiniteDifferencesForEachPruning) {
  const auto part = make_partition(128, 32, 1);
  for (auto kind : {PruningKind::kFull, PruningKind::kSemi, PruningKind::kLinear}) {
    const ToyEncoder enc(grad_config(kind));
    EXPECT_LT(max_group_error(enc, random_batch(5), &part), 1e-4) << to_string(kind);
  }
}

TEST(Gradients, LossMatchesBatchLoss) {
  const ToyEncoder enc(grad_config(PruningKind::kFull));
  const auto part = make_partition(128, 32, 1);
  const auto b = random_batch(8);
  EXPECT_NEAR(compute_gradients(b, enc, &part, LossWeights{}).loss.total,
              batch_loss(b, enc, &part, LossWeights{}).total, 1e-12);
}

TEST(Gradients, FrozenGroupsGetZeros) {
  const ToyEncoder enc(grad_config(PruningKind::kFull));
  const auto part = make_partition(128, 32, 1);
  const auto g = compute_gradients(random_batch(5), enc, &part, LossWeights{},
                                   ParamMask::only({ParamId::kClsWeight, ParamId::kClsBias}));
  double cls_norm = 0.0;
  for (std::size_t pi = 0; pi < kParamCount; ++pi) {
    const auto id = static_cast<ParamId>(pi);
    for (double x : g.grad[id].values) {
      if (id == ParamId::kClsWeight || id == ParamId::kClsBias) cls_norm += x * x;
      else EXPECT_EQ(x, 0.0) << param_name(id);
    }
  }
  EXPECT_GT(cls_norm, 0.0);
}

TEST(Gradients, ThreadCountDoesNotChangeResult) {
  const ToyEncoder enc(grad_config(PruningKind::kFull));
  const auto part = make_partition(128, 32, 1);
  const auto b = random_batch(9, 5);
  const auto g1 = compute_gradients(b, enc, &part, LossWeights{}, ParamMask::all(), 1);
  const auto g3 = compute_gradients(b, enc, &part, LossWeights{}, ParamMask::all(), 3);
  EXPECT_TRUE(g1.grad == g3.grad);
  EXPECT_EQ(g1.loss.total, g3.loss.total);
}

namespace {

struct SmallTask {
  TrainingSet data;
  SlicePartition part = make_partition(128, 32, 1);
};

SmallTask small_task() {
  SynthOptions o;
  o.docs = 32;
  o.queries = 8;
  o.train_queries = 64;
  o.vocab_size = 128;
  o.negatives = 3;
  const auto task = make_synth_task(o);
  SmallTask t;
  t.data = make_training_set(task.corpus, task.train);
  return t;
}

ToyEncoderConfig train_config() {
  ToyEncoderConfig c;
  c.vocab_size = 128;
  c.d_model = 16;
  c.max_positions = 40;
  c.init_scale = 1.0;
  c.group_init_scale[static_cast<std::size_t>(ParamId::kPositionEmbedding)] = 0.0;
  c.group_init_scale[static_cast<std::size_t>(ParamId::kMixContext)] = 0.0;
  c.encoder.d_cls = 0;
  c.encoder.include_cls = false;
  c.encoder.d_agg = 32;
  return c;
}

TrainOptions train_options(std::size_t steps) {
  TrainOptions o;
  o.max_steps = steps;
  o.learning_rate = 0.03;
  o.momentum = 0.9;
  o.max_grad_norm = 1.0;
  o.batch_size = 8;
  o.negatives_per_query = 3;
  return o;
}

}  // namespace

TEST(Train, ZeroLearningRateLeavesParametersUnchanged) {
  const auto t = small_task();
  const ToyEncoder enc(train_config());
  auto o = train_options(3);
  o.learning_rate = 0.0;
  const auto r = train(enc, t.data, &t.part, o);
  EXPECT_TRUE(r.encoder.params() == enc.params());
  EXPECT_EQ(r.trace.size(), 3u);
}

TEST(Train, SameSeedIdenticalParameters) {
  const auto t = small_task();
  const auto a = train(ToyEncoder(train_config()), t.data, &t.part, train_options(5));
  const auto b = train(ToyEncoder(train_config()), t.data, &t.part, train_options(5));
  EXPECT_TRUE(a.encoder.params() == b.encoder.params());
}

TEST(Train, FiftyStepsReduceLoss) {
  const auto t = small_task();
  const auto r = train(ToyEncoder(train_config()), t.data, &t.part, train_options(50));
  ASSERT_EQ(r.trace.size(), 50u);
  double head = 0.0, tail = 0.0;
  for (std::size_t i = 0; i < 10; ++i) {
    head += r.trace[i].loss.total;
    tail += r.trace[40 + i].loss.total;
  }
  EXPECT_LT(tail, head);
}

TEST(Train, LossTraceCsv) {
  std::vector<StepRecord> trace{{0, 0, BatchLoss{1.5, 1, 0.5, 0.5}}};
  const auto csv = loss_trace_csv(trace);
  EXPECT_EQ(csv.substr(0, csv.find('\n')).find("step"), 0u);
  EXPECT_NE(csv.find("1.5"), std::string::npos);
}
