#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "textagg/encoder.hpp"
#include "textagg/index.hpp"
#include "textagg/lexrep.hpp"
#include "textagg/matrix.hpp"
#include "textagg/pruning.hpp"
#include "textagg/training.hpp"

namespace textagg {

struct EmbeddingRecord {
  std::string id;
  TokenEmbeddingSequence sequence;
};

// Per-document contextualized embeddings.
//   magic "AGED", u32 version = 1, u32 d_model, u32 vocab_size, u32 max_len,
//   str producer, u64 count, then per record:
//     str id, u32 len, u32 token_ids[len], u8 special_mask[len],
//     f32 embeddings[len * d_model], f32 cls[d_model]
// Strings are a u32 byte length followed by UTF-8 bytes.
struct EmbeddingDump {
  static constexpr std::uint32_t kVersion = 1;

  std::uint32_t d_model = 0;
  std::uint32_t vocab_size = 0;
  std::uint32_t max_len = 0;
  std::string producer;
  std::vector<EmbeddingRecord> records;

  // Shapes, id range and len <= max_len. Throws ValidationError.
  void validate() const;

  std::vector<std::uint8_t> serialize() const;
  static EmbeddingDump deserialize(std::span<const std::uint8_t> bytes);
  void write(const std::filesystem::path& path) const;
  static EmbeddingDump read(const std::filesystem::path& path);
};

// Encoded vectors ready for indexing or search.
//   magic "AGVC", u32 version = 1, u32 dim, u32 d_cls, u64 count,
//   32-byte partition fingerprint, then per record: str id, f32 values[dim]
struct VectorSet {
  static constexpr std::uint32_t kVersion = 1;

  std::uint32_t dim = 0;
  std::uint32_t d_cls = 0;  // leading CLS slots of every row
  Fingerprint partition{};
  std::vector<std::string> ids;
  Matrix<float> vectors;  // [count x dim]

  std::size_t size() const { return ids.size(); }
  void add(const std::string& id, const ConcatEmbedding& embedding);
  // Row r as an embedding carrying this set's fingerprint.
  ConcatEmbedding embedding(std::size_t r) const;

  std::vector<std::uint8_t> serialize() const;
  static VectorSet deserialize(std::span<const std::uint8_t> bytes);
  void write(const std::filesystem::path& path) const;
  static VectorSet read(const std::filesystem::path& path);
};

// Flat index file.
//   magic "AGIX", u32 version = 1, u32 dim, u64 count, 32-byte partition
//   fingerprint, then per record: u32 id_len, id bytes, f32 values[dim]
inline constexpr std::uint32_t kIndexFileVersion = 1;
std::vector<std::uint8_t> serialize_index(const FlatIndex& index);
FlatIndex deserialize_index(std::span<const std::uint8_t> bytes);
void write_index(const std::filesystem::path& path, const FlatIndex& index);
FlatIndex read_index(const std::filesystem::path& path);

// {"vocab_size", "d", "seed", "prng", "prng_description", "slice_of", "sign_of"}
std::string partition_to_json(const SlicePartition& part);
// Explicit arrays win; without them the partition is regenerated from the
// seed, which requires a matching "prng".
SlicePartition partition_from_json(std::string_view text);
void write_partition(const std::filesystem::path& path, const SlicePartition& part);
SlicePartition read_partition(const std::filesystem::path& path);

// One {"id": str, "token_ids": [int]} object per line.
struct CorpusDoc {
  std::string id;
  TokenIds token_ids;
};
std::vector<CorpusDoc> parse_corpus_jsonl(std::string_view text);
std::string format_corpus_jsonl(std::span<const CorpusDoc> docs);

// One {"query": [int], "positive": id, "negatives": [id]} object per line.
// Document ids may be JSON strings or integers; both are kept as strings.
struct TrainingRecord {
  TokenIds query;
  std::string positive;
  std::vector<std::string> negatives;
};
std::vector<TrainingRecord> parse_training_jsonl(std::string_view text);
std::string format_training_jsonl(std::span<const TrainingRecord> records);

// Resolves document ids against the corpus. Throws ValidationError on
// unknown ids.
TrainingSet make_training_set(std::span<const CorpusDoc> corpus,
                              std::span<const TrainingRecord> records);

// JSON object mirroring EncoderConfig. Keys: d_cls, d_agg, max_query_len,
// max_passage_len, pooling_variant, pruning_kind, include_cls, cls_bias,
// include_sep, sep_token_id. Missing keys keep the value from `base`;
// unknown keys are rejected.
EncoderConfig encoder_config_from_json(std::string_view text,
                                       const EncoderConfig& base = {});
std::string encoder_config_to_json(const EncoderConfig& cfg);

}  // namespace textagg
