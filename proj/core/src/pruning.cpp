#include "textagg/pruning.hpp"

#include <openssl/sha.h>

#include <algorithm>
#include <numeric>
#include <string>

#include "textagg/prng.hpp"

namespace textagg {
namespace {

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t x) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(x >> (8 * i)));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t x) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(x >> (8 * i)));
}

}  // namespace

Fingerprint partition_fingerprint(std::size_t vocab_size, std::size_t d,
                                  std::span<const std::uint32_t> slice_of,
                                  std::span<const std::int8_t> sign_of) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(16 + slice_of.size() * 5);
  put_u64(bytes, vocab_size);
  put_u64(bytes, d);
  for (std::uint32_t s : slice_of) put_u32(bytes, s);
  for (std::int8_t s : sign_of) bytes.push_back(static_cast<std::uint8_t>(s));
  Fingerprint fp{};
  SHA256(bytes.data(), bytes.size(), fp.data());
  return fp;
}

SlicePartition::SlicePartition(std::size_t vocab_size, std::size_t d,
                               std::uint64_t seed,
                               std::vector<std::uint32_t> slice_of,
                               std::vector<std::int8_t> sign_of)
    : d_(d), seed_(seed), slice_of_(std::move(slice_of)), sign_of_(std::move(sign_of)) {
  if (d_ == 0 || d_ > vocab_size) {
    throw InvalidArgument("partition: need 1 <= d <= vocab_size, got d=" +
                          std::to_string(d_) + " vocab_size=" +
                          std::to_string(vocab_size));
  }
  if (slice_of_.size() != vocab_size || sign_of_.size() != vocab_size) {
    throw InvalidArgument("partition: slice_of/sign_of must have vocab_size entries");
  }

  std::vector<std::size_t> size(d_, 0);
  std::vector<std::size_t> positives(d_, 0);
  for (std::size_t u = 0; u < vocab_size; ++u) {
    if (slice_of_[u] >= d_) {
      throw InvalidArgument("partition: slice id " + std::to_string(slice_of_[u]) +
                            " out of range");
    }
    if (sign_of_[u] != 1 && sign_of_[u] != -1) {
      throw InvalidArgument("partition: sign must be +1 or -1");
    }
    ++size[slice_of_[u]];
    if (sign_of_[u] == 1) ++positives[slice_of_[u]];
  }
  const auto [lo, hi] = std::minmax_element(size.begin(), size.end());
  if (*lo == 0 || *hi - *lo > 1) {
    throw InvalidArgument("partition: slices must be nonempty and differ in size by at most 1");
  }
  for (std::size_t n = 0; n < d_; ++n) {
    const std::size_t negatives = size[n] - positives[n];
    if (positives[n] < negatives || positives[n] - negatives > 1) {
      throw InvalidArgument("partition: slice " + std::to_string(n) +
                            " halves are unbalanced");
    }
  }

  offsets_.assign(d_ + 1, 0);
  for (std::size_t n = 0; n < d_; ++n) offsets_[n + 1] = offsets_[n] + size[n];
  members_.resize(vocab_size);
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (std::size_t u = 0; u < vocab_size; ++u) {
    members_[cursor[slice_of_[u]]++] = static_cast<std::uint32_t>(u);
  }
  fingerprint_ = partition_fingerprint(vocab_size, d_, slice_of_, sign_of_);
}

SlicePartition make_partition(std::size_t vocab_size, std::size_t d,
                              std::uint64_t seed) {
  if (d == 0 || d > vocab_size) {
    throw InvalidArgument("make_partition: need 1 <= d <= vocab_size, got d=" +
                          std::to_string(d) + " vocab_size=" +
                          std::to_string(vocab_size));
  }
  std::vector<std::uint32_t> perm(vocab_size);
  std::iota(perm.begin(), perm.end(), 0u);
  Xorshift64Star rng(seed);
  shuffle(std::span<std::uint32_t>(perm), rng);

  std::vector<std::uint32_t> slice_of(vocab_size);
  std::vector<std::int8_t> sign_of(vocab_size);
  const std::size_t base = vocab_size / d;
  const std::size_t extra = vocab_size % d;
  std::size_t pos = 0;
  for (std::size_t n = 0; n < d; ++n) {
    const std::size_t size = base + (n < extra ? 1 : 0);
    const std::size_t positive = (size + 1) / 2;
    for (std::size_t j = 0; j < size; ++j, ++pos) {
      slice_of[perm[pos]] = static_cast<std::uint32_t>(n);
      sign_of[perm[pos]] = j < positive ? 1 : -1;
    }
  }
  return SlicePartition(vocab_size, d, seed, std::move(slice_of), std::move(sign_of));
}

std::pair<AggVector, ArgmaxIds> prune_semi(const LexicalVector& v,
                                           const SlicePartition& part) {
  ArgmaxIds ids = slice_argmax(v.view(), part);
  AggVector agg{std::vector<float>(part.d()), AggKind::kSemi};
  for (std::size_t n = 0; n < part.d(); ++n) agg.values[n] = v.values[ids.ids[n]];
  return {std::move(agg), std::move(ids)};
}

AggVector prune_full(const LexicalVector& v, const SlicePartition& part) {
  auto [agg, ids] = prune_semi(v, part);
  agg.kind = AggKind::kFull;
  for (std::size_t n = 0; n < part.d(); ++n) {
    if (part.sign_of()[ids.ids[n]] < 0) agg.values[n] = -agg.values[n];
  }
  return agg;
}

std::vector<float> prune_linear(const LexicalVector& v,
                                const Matrix<float>& projection) {
  if (projection.rows() != v.size()) {
    throw InvalidArgument("prune_linear: projection has " +
                          std::to_string(projection.rows()) + " rows, vector has " +
                          std::to_string(v.size()) + " entries");
  }
  std::vector<double> acc(projection.cols(), 0.0);
  for (std::size_t u = 0; u < v.size(); ++u) {
    const double x = v.values[u];
    if (x == 0.0) continue;
    const auto row = projection.row(u);
    for (std::size_t n = 0; n < acc.size(); ++n) acc[n] += x * row[n];
  }
  return {acc.begin(), acc.end()};
}

AggVector prune_semi_mean(const LexicalVector& v, const SlicePartition& part) {
  if (v.size() != part.vocab_size()) {
    throw InvalidArgument("prune_semi_mean: vector size " + std::to_string(v.size()) +
                          " != partition vocab size " +
                          std::to_string(part.vocab_size()));
  }
  AggVector agg{std::vector<float>(part.d()), AggKind::kSemi};
  for (std::size_t n = 0; n < part.d(); ++n) {
    double sum = 0.0;
    const auto members = part.members(n);
    for (std::uint32_t u : members) sum += v.values[u];
    agg.values[n] = static_cast<float>(sum / static_cast<double>(members.size()));
  }
  return agg;
}

}  // namespace textagg
