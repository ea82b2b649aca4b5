#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "textagg/lexrep.hpp"
#include "textagg/pruning.hpp"

namespace textagg {

// Sparse nonnegative lexical vector; indices strictly ascending, values > 0.
struct SparseVector {
  std::vector<std::uint32_t> index;
  std::vector<double> value;

  std::size_t nonzeros() const { return index.size(); }
};

LexicalVector to_dense(const SparseVector& v, std::size_t vocab_size);

// Random sparse term-weight profiles: each vector has `nonzeros` distinct
// uniform indices with Exp(1) magnitudes.
struct EnsembleOptions {
  std::size_t vocab_size = 4096;
  std::size_t nonzeros = 64;
  std::size_t pairs = 1000;
  std::uint64_t seed = 0;
};

struct VectorPair {
  SparseVector q;
  SparseVector p;
};

std::vector<VectorPair> make_ensemble(const EnsembleOptions& options);

enum class Pruner {
  kAggPlus,       // slice max pooling
  kAggStar,       // signed slice max pooling
  kLinearRandom,  // signed feature hashing into d buckets
};

std::string to_string(Pruner p);
Pruner parse_pruner(const std::string& name);  // agg_plus, agg_star, linear_random

// A random partition plus the independent +-1 signs used by the hashing
// pruner. Bucket of index u is partition.slice_of()[u].
struct RandomReduction {
  SlicePartition partition;
  std::vector<std::int8_t> hash_sign;
};

RandomReduction make_reduction(std::size_t vocab_size, std::size_t d, std::uint64_t seed);

double exact_dot(const SparseVector& a, const SparseVector& b);

// Dot product after reducing both vectors to d dimensions. Slice
// contributions are summed in ascending order of the first vector's winning
// term, so singleton slices reproduce exact_dot bit for bit.
double pruned_dot(const SparseVector& q, const SparseVector& p, const RandomReduction& r,
                  Pruner pruner);

struct ApproxErrorOptions {
  EnsembleOptions ensemble;
  std::vector<std::size_t> d_values{16, 64, 256, 1024, 4096};
  std::size_t partitions = 20;
  std::vector<Pruner> pruners{Pruner::kAggPlus, Pruner::kAggStar, Pruner::kLinearRandom};
  unsigned threads = 1;
};

struct ApproxErrorRow {
  std::size_t d = 0;
  Pruner pruner = Pruner::kAggPlus;
  double mean_abs_err = 0.0;
  double std_error = 0.0;  // over pairs, of the per-pair mean error
  std::string seed_set;
  std::vector<double> per_pair;  // mean over partitions, one per pair
};

// One row per (d, pruner), d-major in the order given.
std::vector<ApproxErrorRow> approx_error(const ApproxErrorOptions& options);

// Header d,pruner,mean_abs_err,stderr,seed_set with shortest round-trip
// number formatting.
std::string approx_error_csv(std::span<const ApproxErrorRow> rows);

struct BootstrapResult {
  double mean_diff = 0.0;    // mean of a - b
  double lower_bound = 0.0;  // one-sided lower confidence bound of the mean
};

// Paired bootstrap over indices; resamples pairs with replacement.
BootstrapResult paired_bootstrap(std::span<const double> a, std::span<const double> b,
                                 std::size_t resamples, double confidence,
                                 std::uint64_t seed);

struct CancellationStats {
  std::size_t aligned = 0;
  std::size_t opposite_sign = 0;  // misaligned, winners in opposite halves
  std::size_t same_sign = 0;      // misaligned, winners in the same half

  std::size_t misaligned() const { return opposite_sign + same_sign; }
  std::size_t total() const { return aligned + misaligned(); }
  double opposite_fraction() const;
  CancellationStats& operator+=(const CancellationStats& o);
};

// Fraction of slices whose argmax differs between q and p.
double misalignment_rate(const LexicalVector& q, const LexicalVector& p,
                         const SlicePartition& part);

CancellationStats sign_cancellation_stats(const LexicalVector& q, const LexicalVector& p,
                                          const SlicePartition& part);

// Pools sign_cancellation_stats over the ensemble and `partitions` random
// partitions of d slices.
CancellationStats cancellation_experiment(const EnsembleOptions& ensemble, std::size_t d,
                                          std::size_t partitions, unsigned threads = 1);

}  // namespace textagg
