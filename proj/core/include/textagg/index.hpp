#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "textagg/encoder.hpp"
#include "textagg/matrix.hpp"
#include "textagg/pruning.hpp"

namespace textagg {

struct SearchHit {
  std::string id;
  double score = 0.0;

  bool operator==(const SearchHit&) const = default;
};

// Exhaustive inner-product index. Vectors are stored in f32, scores are
// accumulated in f64. Immutable once built.
class FlatIndex {
 public:
  // Empty index of the given dimension.
  explicit FlatIndex(std::size_t dim = 0, Fingerprint partition = kNoPartition);

  // Throws BuildError on duplicate ids or mixed dimensions/partitions.
  static FlatIndex build(std::vector<std::pair<std::string, ConcatEmbedding>> items);
  static FlatIndex build_raw(std::size_t dim, const Fingerprint& partition,
                             std::vector<std::string> ids, Matrix<float> vectors);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  const Fingerprint& partition() const { return partition_; }
  const std::vector<std::string>& ids() const { return ids_; }
  const Matrix<float>& vectors() const { return vectors_; }

  // Top min(k, size) hits by descending score, ties by ascending id. The
  // query's partition fingerprint must match the index's.
  std::vector<SearchHit> search(const ConcatEmbedding& query, std::size_t k,
                                unsigned threads = 1) const;
  // Same, without the partition check.
  std::vector<SearchHit> search_raw(std::span<const float> query, std::size_t k,
                                    unsigned threads = 1) const;

  bool operator==(const FlatIndex& other) const {
    return dim_ == other.dim_ && partition_ == other.partition_ && ids_ == other.ids_ &&
           vectors_ == other.vectors_;
  }

 private:
  std::size_t dim_ = 0;
  Fingerprint partition_{};
  std::vector<std::string> ids_;
  std::vector<std::uint32_t> id_rank_;  // position of ids_[i] in sorted order
  Matrix<float> vectors_;
};

}  // namespace textagg
