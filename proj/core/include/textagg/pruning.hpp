#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "textagg/lexrep.hpp"
#include "textagg/matrix.hpp"

namespace textagg {

using Fingerprint = std::array<std::uint8_t, 32>;

// Assignment of every vocabulary index to one of d slices, and within its
// slice to the positive or negative half.
class SlicePartition {
 public:
  // Validates: slice ids in [0, d), every slice nonempty, slice sizes within
  // one of each other, signs in {+1, -1} with halves within one of each other.
  SlicePartition(std::size_t vocab_size, std::size_t d, std::uint64_t seed,
                 std::vector<std::uint32_t> slice_of,
                 std::vector<std::int8_t> sign_of);

  std::size_t vocab_size() const { return slice_of_.size(); }
  std::size_t d() const { return d_; }
  std::uint64_t seed() const { return seed_; }
  std::span<const std::uint32_t> slice_of() const { return slice_of_; }
  std::span<const std::int8_t> sign_of() const { return sign_of_; }

  // Vocabulary indices of slice n in ascending order.
  std::span<const std::uint32_t> members(std::size_t n) const {
    return {members_.data() + offsets_[n], offsets_[n + 1] - offsets_[n]};
  }

  // SHA-256 over the canonical little-endian encoding of (vocab_size, d,
  // slice_of, sign_of). The seed is not part of the identity.
  const Fingerprint& fingerprint() const { return fingerprint_; }

  bool operator==(const SlicePartition& other) const {
    return d_ == other.d_ && seed_ == other.seed_ &&
           slice_of_ == other.slice_of_ && sign_of_ == other.sign_of_;
  }

 private:
  std::size_t d_;
  std::uint64_t seed_;
  std::vector<std::uint32_t> slice_of_;
  std::vector<std::int8_t> sign_of_;
  std::vector<std::size_t> offsets_;
  std::vector<std::uint32_t> members_;
  Fingerprint fingerprint_{};
};

// Seeded random permutation of [0, vocab_size) dealt contiguously into d
// slices; the first vocab_size % d slices get one extra element. Within a
// slice the first ceil(size / 2) dealt elements are positive.
SlicePartition make_partition(std::size_t vocab_size, std::size_t d,
                              std::uint64_t seed);

enum class AggKind { kSemi, kFull };

struct AggVector {
  std::vector<float> values;
  AggKind kind = AggKind::kFull;

  std::size_t size() const { return values.size(); }
};

struct ArgmaxIds {
  std::vector<std::uint32_t> ids;
};

// Per-slice argmax with ties going to the lowest vocabulary index.
template <class T>
ArgmaxIds slice_argmax(std::span<const T> values, const SlicePartition& part) {
  if (values.size() != part.vocab_size()) {
    throw InvalidArgument("slice_argmax: vector size " +
                          std::to_string(values.size()) +
                          " != partition vocab size " +
                          std::to_string(part.vocab_size()));
  }
  ArgmaxIds out;
  out.ids.resize(part.d());
  for (std::size_t n = 0; n < part.d(); ++n) {
    const auto members = part.members(n);
    std::uint32_t best = members[0];
    for (std::uint32_t u : members.subspan(1)) {
      if (values[u] > values[best]) best = u;
    }
    out.ids[n] = best;
  }
  return out;
}

// Slice max pooling: agg[n] = max of v over slice n.
std::pair<AggVector, ArgmaxIds> prune_semi(const LexicalVector& v,
                                           const SlicePartition& part);

// Slice max pooling with the sign of the winning term's half.
AggVector prune_full(const LexicalVector& v, const SlicePartition& part);

// v^T * projection, projection is [vocab_size x d].
std::vector<float> prune_linear(const LexicalVector& v,
                                const Matrix<float>& projection);

// Per-slice arithmetic mean.
AggVector prune_semi_mean(const LexicalVector& v, const SlicePartition& part);

Fingerprint partition_fingerprint(std::size_t vocab_size, std::size_t d,
                                  std::span<const std::uint32_t> slice_of,
                                  std::span<const std::int8_t> sign_of);

// Fingerprint used when no partition took part in encoding.
inline constexpr Fingerprint kNoPartition{};

}  // namespace textagg
