#include "textagg/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "textagg/error.hpp"
#include "textagg/eval.hpp"
#include "textagg/parallel.hpp"
#include "textagg/prng.hpp"

namespace textagg {
namespace {

constexpr std::uint64_t kEnsembleStream = 0;
constexpr std::uint64_t kBootstrapStream = 1;
constexpr std::size_t kPairsPerTask = 64;

struct SliceWinner {
  std::uint32_t slice;
  std::uint32_t id;
  double value;
};

std::vector<SliceWinner> slice_winners(const SparseVector& v, const SlicePartition& part) {
  std::vector<SliceWinner> w;
  w.reserve(v.nonzeros());
  const auto slice_of = part.slice_of();
  for (std::size_t k = 0; k < v.nonzeros(); ++k) {
    w.push_back({slice_of[v.index[k]], v.index[k], v.value[k]});
  }
  std::sort(w.begin(), w.end(), [](const SliceWinner& a, const SliceWinner& b) {
    if (a.slice != b.slice) return a.slice < b.slice;
    if (a.value != b.value) return a.value > b.value;
    return a.id < b.id;
  });
  w.erase(std::unique(w.begin(), w.end(),
                      [](const SliceWinner& a, const SliceWinner& b) { return a.slice == b.slice; }),
          w.end());
  return w;
}

std::vector<std::pair<std::uint32_t, double>> hashed(const SparseVector& v,
                                                     const RandomReduction& r) {
  std::vector<std::pair<std::uint32_t, double>> buckets;
  const auto slice_of = r.partition.slice_of();
  for (std::size_t k = 0; k < v.nonzeros(); ++k) {
    buckets.emplace_back(slice_of[v.index[k]], r.hash_sign[v.index[k]] * v.value[k]);
  }
  std::stable_sort(buckets.begin(), buckets.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::pair<std::uint32_t, double>> merged;
  for (const auto& [bucket, x] : buckets) {
    if (!merged.empty() && merged.back().first == bucket) {
      merged.back().second += x;
    } else {
      merged.emplace_back(bucket, x);
    }
  }
  return merged;
}

void check_sizes(const LexicalVector& q, const LexicalVector& p, const SlicePartition& part) {
  if (q.size() != part.vocab_size() || p.size() != part.vocab_size()) {
    throw InvalidArgument("vector sizes " + std::to_string(q.size()) + "/" +
                          std::to_string(p.size()) + " differ from partition vocab size " +
                          std::to_string(part.vocab_size()));
  }
}

}  // namespace

LexicalVector to_dense(const SparseVector& v, std::size_t vocab_size) {
  LexicalVector out;
  out.values.assign(vocab_size, 0.0f);
  for (std::size_t k = 0; k < v.nonzeros(); ++k) {
    if (v.index[k] >= vocab_size) throw InvalidArgument("sparse index out of range");
    out.values[v.index[k]] = static_cast<float>(v.value[k]);
  }
  return out;
}

std::vector<VectorPair> make_ensemble(const EnsembleOptions& options) {
  if (options.vocab_size == 0 || options.nonzeros == 0 ||
      options.nonzeros > options.vocab_size) {
    throw InvalidArgument("ensemble: need 1 <= nonzeros <= vocab_size");
  }
  Xorshift64Star rng(derive_seed(options.seed, kEnsembleStream));
  std::vector<bool> taken(options.vocab_size);
  const auto draw = [&] {
    std::vector<std::pair<std::uint32_t, double>> entries;
    while (entries.size() < options.nonzeros) {
      const auto u = static_cast<std::uint32_t>(rng.bounded(options.vocab_size));
      if (taken[u]) continue;
      taken[u] = true;
      entries.emplace_back(u, 0.0);
    }
    for (auto& e : entries) {
      e.second = rng.exponential();
      taken[e.first] = false;
    }
    std::sort(entries.begin(), entries.end());
    SparseVector v;
    for (const auto& [u, x] : entries) {
      v.index.push_back(u);
      v.value.push_back(x);
    }
    return v;
  };
  std::vector<VectorPair> pairs;
  pairs.reserve(options.pairs);
  for (std::size_t i = 0; i < options.pairs; ++i) {
    VectorPair pair;
    pair.q = draw();
    pair.p = draw();
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

std::string to_string(Pruner p) {
  switch (p) {
    case Pruner::kAggPlus: return "agg_plus";
    case Pruner::kAggStar: return "agg_star";
    case Pruner::kLinearRandom: return "linear_random";
  }
  return "?";
}

Pruner parse_pruner(const std::string& name) {
  if (name == "agg_plus") return Pruner::kAggPlus;
  if (name == "agg_star") return Pruner::kAggStar;
  if (name == "linear_random") return Pruner::kLinearRandom;
  throw InvalidArgument("unknown pruner \"" + name + "\"");
}

RandomReduction make_reduction(std::size_t vocab_size, std::size_t d, std::uint64_t seed) {
  RandomReduction r{make_partition(vocab_size, d, seed), {}};
  Xorshift64Star rng(derive_seed(seed, 0x5167));
  r.hash_sign.resize(vocab_size);
  for (auto& s : r.hash_sign) s = (rng.next() >> 63) ? std::int8_t{1} : std::int8_t{-1};
  return r;
}

double exact_dot(const SparseVector& a, const SparseVector& b) {
  double acc = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.nonzeros() && j < b.nonzeros()) {
    if (a.index[i] < b.index[j]) {
      ++i;
    } else if (b.index[j] < a.index[i]) {
      ++j;
    } else {
      acc += a.value[i++] * b.value[j++];
    }
  }
  return acc;
}

double pruned_dot(const SparseVector& q, const SparseVector& p, const RandomReduction& r,
                  Pruner pruner) {
  if (pruner == Pruner::kLinearRandom) {
    const auto a = hashed(q, r);
    const auto b = hashed(p, r);
    double acc = 0.0;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.size() && j < b.size()) {
      if (a[i].first < b[j].first) {
        ++i;
      } else if (b[j].first < a[i].first) {
        ++j;
      } else {
        acc += a[i++].second * b[j++].second;
      }
    }
    return acc;
  }
  const auto a = slice_winners(q, r.partition);
  const auto b = slice_winners(p, r.partition);
  const auto sign = r.partition.sign_of();
  std::vector<std::pair<std::uint32_t, double>> terms;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].slice < b[j].slice) {
      ++i;
    } else if (b[j].slice < a[i].slice) {
      ++j;
    } else {
      double term = a[i].value * b[j].value;
      if (pruner == Pruner::kAggStar && sign[a[i].id] != sign[b[j].id]) term = -term;
      terms.emplace_back(a[i].id, term);
      ++i;
      ++j;
    }
  }
  std::sort(terms.begin(), terms.end());
  double acc = 0.0;
  for (const auto& t : terms) acc += t.second;
  return acc;
}

std::vector<ApproxErrorRow> approx_error(const ApproxErrorOptions& options) {
  const std::size_t vocab = options.ensemble.vocab_size;
  for (std::size_t d : options.d_values) {
    if (d == 0 || d > vocab) {
      throw InvalidArgument("approx_error: d = " + std::to_string(d) + " outside [1, " +
                            std::to_string(vocab) + "]");
    }
  }
  if (options.partitions == 0) throw InvalidArgument("approx_error: partitions must be >= 1");
  if (options.pruners.empty()) throw InvalidArgument("approx_error: no pruners requested");

  const auto pairs = make_ensemble(options.ensemble);
  const std::size_t n = pairs.size();
  std::vector<double> exact(n);
  for (std::size_t i = 0; i < n; ++i) exact[i] = exact_dot(pairs[i].q, pairs[i].p);

  const std::string seed_set = "seed=" + std::to_string(options.ensemble.seed) +
                               ";partitions=" + std::to_string(options.partitions) +
                               ";pairs=" + std::to_string(n);
  std::vector<ApproxErrorRow> rows;
  for (std::size_t d : options.d_values) {
    std::vector<RandomReduction> reductions;
    for (std::size_t t = 0; t < options.partitions; ++t) {
      reductions.push_back(
          make_reduction(vocab, d, derive_seed(derive_seed(options.ensemble.seed, d), t + 1)));
    }
    for (Pruner pruner : options.pruners) {
      ApproxErrorRow row{d, pruner, 0.0, 0.0, seed_set, std::vector<double>(n)};
      const std::size_t tasks = (n + kPairsPerTask - 1) / kPairsPerTask;
      parallel_for(tasks, options.threads, [&](std::size_t task) {
        const std::size_t end = std::min(n, (task + 1) * kPairsPerTask);
        for (std::size_t i = task * kPairsPerTask; i < end; ++i) {
          double sum = 0.0;
          for (const auto& r : reductions) {
            sum += std::abs(exact[i] - pruned_dot(pairs[i].q, pairs[i].p, r, pruner));
          }
          row.per_pair[i] = sum / static_cast<double>(reductions.size());
        }
      });
      double mean = 0.0;
      for (double e : row.per_pair) mean += e;
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (double e : row.per_pair) var += (e - mean) * (e - mean);
      row.mean_abs_err = mean;
      row.std_error = n > 1 ? std::sqrt(var / static_cast<double>(n - 1) / static_cast<double>(n))
                            : 0.0;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string approx_error_csv(std::span<const ApproxErrorRow> rows) {
  std::string out = "d,pruner,mean_abs_err,stderr,seed_set\n";
  for (const auto& r : rows) {
    out += std::to_string(r.d) + "," + to_string(r.pruner) + "," + format_score(r.mean_abs_err) +
           "," + format_score(r.std_error) + "," + r.seed_set + "\n";
  }
  return out;
}

BootstrapResult paired_bootstrap(std::span<const double> a, std::span<const double> b,
                                 std::size_t resamples, double confidence, std::uint64_t seed) {
  if (a.size() != b.size() || a.empty()) {
    throw InvalidArgument("paired_bootstrap: need two nonempty samples of equal size");
  }
  if (resamples == 0 || !(confidence > 0.0 && confidence < 1.0)) {
    throw InvalidArgument("paired_bootstrap: bad resample count or confidence");
  }
  const std::size_t n = a.size();
  std::vector<double> diff(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    diff[i] = a[i] - b[i];
    mean += diff[i];
  }
  mean /= static_cast<double>(n);
  Xorshift64Star rng(derive_seed(seed, kBootstrapStream));
  std::vector<double> means(resamples);
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += diff[rng.bounded(n)];
    m = s / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  const auto k = static_cast<std::size_t>(
      std::floor((1.0 - confidence) * static_cast<double>(resamples)));
  return {mean, means[std::min(k, resamples - 1)]};
}

double CancellationStats::opposite_fraction() const {
  return misaligned() == 0 ? 0.0
                           : static_cast<double>(opposite_sign) / static_cast<double>(misaligned());
}

CancellationStats& CancellationStats::operator+=(const CancellationStats& o) {
  aligned += o.aligned;
  opposite_sign += o.opposite_sign;
  same_sign += o.same_sign;
  return *this;
}

double misalignment_rate(const LexicalVector& q, const LexicalVector& p,
                         const SlicePartition& part) {
  const auto s = sign_cancellation_stats(q, p, part);
  return static_cast<double>(s.misaligned()) / static_cast<double>(s.total());
}

CancellationStats sign_cancellation_stats(const LexicalVector& q, const LexicalVector& p,
                                          const SlicePartition& part) {
  check_sizes(q, p, part);
  const auto iq = slice_argmax(q.view(), part);
  const auto ip = slice_argmax(p.view(), part);
  const auto sign = part.sign_of();
  CancellationStats s;
  for (std::size_t n = 0; n < part.d(); ++n) {
    if (iq.ids[n] == ip.ids[n]) {
      ++s.aligned;
    } else if (sign[iq.ids[n]] != sign[ip.ids[n]]) {
      ++s.opposite_sign;
    } else {
      ++s.same_sign;
    }
  }
  return s;
}

CancellationStats cancellation_experiment(const EnsembleOptions& ensemble, std::size_t d,
                                          std::size_t partitions, unsigned threads) {
  const auto pairs = make_ensemble(ensemble);
  std::vector<CancellationStats> per_task(partitions);
  parallel_for(partitions, threads, [&](std::size_t t) {
    const auto part = make_partition(ensemble.vocab_size, d,
                                     derive_seed(derive_seed(ensemble.seed, d), t + 1));
    for (const auto& pair : pairs) {
      per_task[t] += sign_cancellation_stats(to_dense(pair.q, ensemble.vocab_size),
                                             to_dense(pair.p, ensemble.vocab_size), part);
    }
  });
  CancellationStats total;
  for (const auto& s : per_task) total += s;
  return total;
}

}  // namespace textagg
