#include "textagg/index.hpp"

#include <algorithm>
#include <numeric>
#include <queue>

#include "textagg/parallel.hpp"

namespace textagg {
namespace {

constexpr std::size_t kRowsPerTask = 4096;

struct Candidate {
  double score;
  std::uint32_t rank;  // id order, lower wins ties
  std::uint32_t row;
};

// Strict "a ranks before b".
bool better(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.rank < b.rank;
}

}  // namespace

FlatIndex::FlatIndex(std::size_t dim, Fingerprint partition)
    : dim_(dim), partition_(partition), vectors_(0, dim) {}

FlatIndex FlatIndex::build_raw(std::size_t dim, const Fingerprint& partition,
                               std::vector<std::string> ids, Matrix<float> vectors) {
  if (vectors.rows() != ids.size() || (vectors.rows() > 0 && vectors.cols() != dim)) {
    throw BuildError("index build: " + std::to_string(ids.size()) + " ids for " +
                     std::to_string(vectors.rows()) + " vectors of dimension " +
                     std::to_string(vectors.cols()) + " (expected " + std::to_string(dim) + ")");
  }
  FlatIndex index(dim, partition);
  std::vector<std::uint32_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(),
            [&](std::uint32_t a, std::uint32_t b) { return ids[a] < ids[b]; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (ids[order[i]] == ids[order[i - 1]]) {
      throw BuildError("index build: duplicate id \"" + ids[order[i]] + "\"");
    }
  }
  index.id_rank_.resize(ids.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    index.id_rank_[order[r]] = static_cast<std::uint32_t>(r);
  }
  index.ids_ = std::move(ids);
  index.vectors_ = vectors.rows() > 0 ? std::move(vectors) : Matrix<float>(0, dim);
  return index;
}

FlatIndex FlatIndex::build(std::vector<std::pair<std::string, ConcatEmbedding>> items) {
  if (items.empty()) return FlatIndex();
  const std::size_t dim = items.front().second.dim();
  const Fingerprint partition = items.front().second.partition;
  std::vector<std::string> ids;
  std::vector<float> data;
  ids.reserve(items.size());
  data.reserve(items.size() * dim);
  for (auto& [id, emb] : items) {
    if (emb.dim() != dim) {
      throw BuildError("index build: \"" + id + "\" has dimension " +
                       std::to_string(emb.dim()) + ", expected " + std::to_string(dim));
    }
    if (emb.partition != partition) {
      throw BuildError("index build: \"" + id + "\" was encoded with a different partition");
    }
    const auto flat = emb.flatten();
    data.insert(data.end(), flat.begin(), flat.end());
    ids.push_back(std::move(id));
  }
  const std::size_t count = ids.size();
  return build_raw(dim, partition, std::move(ids), Matrix<float>(count, dim, std::move(data)));
}

std::vector<SearchHit> FlatIndex::search(const ConcatEmbedding& query, std::size_t k,
                                         unsigned threads) const {
  if (query.partition != partition_) {
    throw InvalidArgument("search: query was encoded with a different partition than the index");
  }
  const auto flat = query.flatten();
  return search_raw(flat, k, threads);
}

std::vector<SearchHit> FlatIndex::search_raw(std::span<const float> query, std::size_t k,
                                             unsigned threads) const {
  if (k == 0) throw InvalidArgument("search: k must be >= 1");
  if (size() == 0) return {};
  if (query.size() != dim_) {
    throw InvalidArgument("search: query dimension " + std::to_string(query.size()) +
                          " != index dimension " + std::to_string(dim_));
  }
  const std::size_t n = size();
  const std::size_t keep = std::min(k, n);

  // Each task keeps a bounded heap whose top is the worst retained candidate.
  auto worse_on_top = [](const Candidate& a, const Candidate& b) { return better(a, b); };
  using Heap = std::priority_queue<Candidate, std::vector<Candidate>, decltype(worse_on_top)>;
  const std::size_t tasks = (n + kRowsPerTask - 1) / kRowsPerTask;
  std::vector<std::vector<Candidate>> partial(tasks);
  parallel_for(tasks, threads, [&](std::size_t task) {
    Heap heap(worse_on_top);
    const std::size_t end = std::min(n, (task + 1) * kRowsPerTask);
    for (std::size_t r = task * kRowsPerTask; r < end; ++r) {
      const Candidate c{dot(query, vectors_.row(r)), id_rank_[r], static_cast<std::uint32_t>(r)};
      if (heap.size() < keep) {
        heap.push(c);
      } else if (better(c, heap.top())) {
        heap.pop();
        heap.push(c);
      }
    }
    auto& out = partial[task];
    out.reserve(heap.size());
    while (!heap.empty()) {
      out.push_back(heap.top());
      heap.pop();
    }
  });

  std::vector<Candidate> merged;
  for (const auto& p : partial) merged.insert(merged.end(), p.begin(), p.end());
  std::partial_sort(merged.begin(), merged.begin() + static_cast<std::ptrdiff_t>(keep),
                    merged.end(), better);
  std::vector<SearchHit> hits;
  hits.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) hits.push_back({ids_[merged[i].row], merged[i].score});
  return hits;
}

}  // namespace textagg
