#include "textagg/io_formats.hpp"

#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "textagg/binary_io.hpp"
#include "textagg/error.hpp"
#include "textagg/prng.hpp"

namespace textagg {
namespace {

using nlohmann::json;

json parse_json(std::string_view text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(what + ": " + e.what());
  }
}

// Wraps nlohmann type errors so callers only see ParseError.
template <class T>
T get_as(const json& j, const char* key, const std::string& what) {
  const auto it = j.find(key);
  if (it == j.end()) throw ParseError(what + ": missing \"" + key + "\"");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw ParseError(what + ": bad \"" + key + "\": " + e.what());
  }
}

std::string doc_id_of(const json& j, const std::string& what) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return j.dump();
  throw ParseError(what + ": document ids must be strings or integers");
}

TokenIds token_ids_of(const json& j, const char* key, const std::string& what) {
  const auto values = get_as<std::vector<std::int64_t>>(j, key, what);
  TokenIds ids;
  ids.reserve(values.size());
  for (auto v : values) {
    if (v < 0 || v > static_cast<std::int64_t>(UINT32_MAX)) {
      throw ParseError(what + ": token id " + std::to_string(v) + " out of range");
    }
    ids.push_back(static_cast<std::uint32_t>(v));
  }
  return ids;
}

template <class Fn>
void for_each_json_line(std::string_view text, const char* what, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = std::string(what) + " line " + std::to_string(line_no);
    const json j = parse_json(line, where);
    if (!j.is_object()) throw ParseError(where + ": expected a JSON object");
    fn(j, where);
  }
}

void write_fingerprint(ByteWriter& w, const Fingerprint& fp) { w.raw(fp); }

Fingerprint read_fingerprint(ByteReader& r) {
  Fingerprint fp{};
  r.raw(fp);
  return fp;
}

std::uint32_t narrow_u32(std::size_t n, const char* what) {
  if (n > UINT32_MAX) throw InvalidArgument(std::string(what) + " does not fit in u32");
  return static_cast<std::uint32_t>(n);
}

}  // namespace

// ---- EmbeddingDump ----------------------------------------------------------

void EmbeddingDump::validate() const {
  std::unordered_set<std::string> seen;
  for (const auto& rec : records) {
    const auto& s = rec.sequence;
    const std::string where = "embedding dump record \"" + rec.id + "\"";
    if (!seen.insert(rec.id).second) throw ValidationError(where + ": duplicate id");
    if (s.length() > max_len) {
      throw ValidationError(where + ": length " + std::to_string(s.length()) +
                            " exceeds max_len " + std::to_string(max_len));
    }
    if (s.embeddings.cols() != d_model || s.cls_embedding.size() != d_model) {
      throw ValidationError(where + ": embedding width differs from d_model " +
                            std::to_string(d_model));
    }
    try {
      s.validate(vocab_size);
    } catch (const InvalidArgument& e) {
      throw ValidationError(where + ": " + e.what());
    }
  }
}

std::vector<std::uint8_t> EmbeddingDump::serialize() const {
  ByteWriter w;
  w.magic("AGED");
  w.u32(kVersion);
  w.u32(d_model);
  w.u32(vocab_size);
  w.u32(max_len);
  w.str(producer);
  w.u64(records.size());
  for (const auto& rec : records) {
    const auto& s = rec.sequence;
    w.str(rec.id);
    w.u32(narrow_u32(s.length(), "sequence length"));
    for (auto id : s.token_ids) w.u32(id);
    for (auto m : s.special_mask) w.u8(m);
    w.f32s(s.embeddings.values());
    w.f32s(s.cls_embedding);
  }
  return w.take();
}

EmbeddingDump EmbeddingDump::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "embedding dump");
  r.expect_magic("AGED");
  r.expect_version(kVersion);
  EmbeddingDump dump;
  dump.d_model = r.u32();
  dump.vocab_size = r.u32();
  dump.max_len = r.u32();
  dump.producer = r.str();
  const std::uint64_t count = r.u64();
  // Every record takes at least 8 bytes, so a larger count is a truncation.
  r.need(count * 8, "records");
  dump.records.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    EmbeddingRecord rec;
    rec.id = r.str();
    const std::uint32_t len = r.u32();
    r.need(static_cast<std::uint64_t>(len) * (5 + 4ULL * dump.d_model), "record payload");
    auto& s = rec.sequence;
    s.token_ids.resize(len);
    for (auto& id : s.token_ids) id = r.u32();
    s.special_mask.resize(len);
    for (auto& m : s.special_mask) {
      m = r.u8();
      if (m > 1) throw ParseError("embedding dump: special_mask byte is not 0 or 1");
    }
    s.embeddings = Matrix<float>(len, dump.d_model);
    r.f32s(s.embeddings.values());
    s.cls_embedding.resize(dump.d_model);
    r.f32s(s.cls_embedding);
    dump.records.push_back(std::move(rec));
  }
  r.expect_end();
  return dump;
}

void EmbeddingDump::write(const std::filesystem::path& path) const {
  write_file_bytes(path, serialize());
}

EmbeddingDump EmbeddingDump::read(const std::filesystem::path& path) {
  return deserialize(read_file_bytes(path));
}

// ---- VectorSet --------------------------------------------------------------

void VectorSet::add(const std::string& id, const ConcatEmbedding& embedding) {
  if (ids.empty() && vectors.rows() == 0) {
    dim = narrow_u32(embedding.dim(), "dim");
    d_cls = narrow_u32(embedding.cls_part.size(), "d_cls");
    partition = embedding.partition;
    vectors = Matrix<float>(0, dim);
  }
  if (embedding.dim() != dim || embedding.cls_part.size() != d_cls) {
    throw InvalidArgument("vector set: embedding shape differs from the set");
  }
  if (embedding.partition != partition) {
    throw InvalidArgument("vector set: embedding encoded with a different partition");
  }
  const auto flat = embedding.flatten();
  vectors.append_row(std::span<const float>(flat));
  ids.push_back(id);
}

ConcatEmbedding VectorSet::embedding(std::size_t r) const {
  const auto row = vectors.row(r);
  ConcatEmbedding e;
  e.cls_part.assign(row.begin(), row.begin() + d_cls);
  e.agg_part.values.assign(row.begin() + d_cls, row.end());
  e.partition = partition;
  return e;
}

std::vector<std::uint8_t> VectorSet::serialize() const {
  ByteWriter w;
  w.magic("AGVC");
  w.u32(kVersion);
  w.u32(dim);
  w.u32(d_cls);
  w.u64(ids.size());
  write_fingerprint(w, partition);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    w.str(ids[i]);
    w.f32s(vectors.row(i));
  }
  return w.take();
}

VectorSet VectorSet::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "vector file");
  r.expect_magic("AGVC");
  r.expect_version(kVersion);
  VectorSet set;
  set.dim = r.u32();
  set.d_cls = r.u32();
  if (set.d_cls > set.dim) throw ParseError("vector file: d_cls exceeds dim");
  const std::uint64_t count = r.u64();
  set.partition = read_fingerprint(r);
  r.need(count * (4 + 4ULL * set.dim), "records");
  set.vectors = Matrix<float>(count, set.dim);
  set.ids.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    set.ids.push_back(r.str());
    r.f32s(set.vectors.row(i));
  }
  r.expect_end();
  return set;
}

void VectorSet::write(const std::filesystem::path& path) const {
  write_file_bytes(path, serialize());
}

VectorSet VectorSet::read(const std::filesystem::path& path) {
  return deserialize(read_file_bytes(path));
}

// ---- FlatIndex file ---------------------------------------------------------

std::vector<std::uint8_t> serialize_index(const FlatIndex& index) {
  ByteWriter w;
  w.magic("AGIX");
  w.u32(kIndexFileVersion);
  w.u32(narrow_u32(index.dim(), "dim"));
  w.u64(index.size());
  write_fingerprint(w, index.partition());
  for (std::size_t i = 0; i < index.size(); ++i) {
    w.str(index.ids()[i]);
    w.f32s(index.vectors().row(i));
  }
  return w.take();
}

FlatIndex deserialize_index(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "index file");
  r.expect_magic("AGIX");
  r.expect_version(kIndexFileVersion);
  const std::uint32_t dim = r.u32();
  const std::uint64_t count = r.u64();
  const Fingerprint fp = read_fingerprint(r);
  r.need(count * (4 + 4ULL * dim), "records");
  std::vector<std::string> ids;
  ids.reserve(count);
  Matrix<float> vectors(count, dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    ids.push_back(r.str());
    r.f32s(vectors.row(i));
  }
  r.expect_end();
  try {
    return FlatIndex::build_raw(dim, fp, std::move(ids), std::move(vectors));
  } catch (const BuildError& e) {
    throw ParseError(std::string("index file: ") + e.what());
  }
}

void write_index(const std::filesystem::path& path, const FlatIndex& index) {
  write_file_bytes(path, serialize_index(index));
}

FlatIndex read_index(const std::filesystem::path& path) {
  return deserialize_index(read_file_bytes(path));
}

// ---- Partition JSON ---------------------------------------------------------

std::string partition_to_json(const SlicePartition& part) {
  json j;
  j["vocab_size"] = part.vocab_size();
  j["d"] = part.d();
  j["seed"] = part.seed();
  j["prng"] = kPrngName;
  j["prng_description"] = kPrngDescription;
  j["slice_of"] = std::vector<std::uint32_t>(part.slice_of().begin(), part.slice_of().end());
  j["sign_of"] = std::vector<int>(part.sign_of().begin(), part.sign_of().end());
  return j.dump() + "\n";
}

SlicePartition partition_from_json(std::string_view text) {
  const std::string what = "partition file";
  const json j = parse_json(text, what);
  if (!j.is_object()) throw ParseError(what + ": expected a JSON object");
  const auto vocab_size = get_as<std::size_t>(j, "vocab_size", what);
  const auto d = get_as<std::size_t>(j, "d", what);
  const auto seed = get_as<std::uint64_t>(j, "seed", what);
  const bool has_slices = j.contains("slice_of");
  const bool has_signs = j.contains("sign_of");
  if (has_slices != has_signs) {
    throw ParseError(what + ": slice_of and sign_of must appear together");
  }
  if (!has_slices) {
    const auto prng = get_as<std::string>(j, "prng", what);
    if (prng != kPrngName) {
      throw ParseError(what + ": cannot regenerate a partition from prng \"" + prng + "\"");
    }
    return make_partition(vocab_size, d, seed);
  }
  const auto slice_of = get_as<std::vector<std::uint32_t>>(j, "slice_of", what);
  const auto signs = get_as<std::vector<int>>(j, "sign_of", what);
  if (slice_of.size() != vocab_size || signs.size() != vocab_size) {
    throw ParseError(what + ": array lengths differ from vocab_size");
  }
  std::vector<std::int8_t> sign_of;
  sign_of.reserve(signs.size());
  for (int s : signs) {
    if (s != 1 && s != -1) throw ParseError(what + ": sign_of entries must be +1 or -1");
    sign_of.push_back(static_cast<std::int8_t>(s));
  }
  try {
    return SlicePartition(vocab_size, d, seed, slice_of, std::move(sign_of));
  } catch (const InvalidArgument& e) {
    throw ParseError(what + ": " + e.what());
  }
}

void write_partition(const std::filesystem::path& path, const SlicePartition& part) {
  write_text_file(path, partition_to_json(part));
}

SlicePartition read_partition(const std::filesystem::path& path) {
  return partition_from_json(read_text_file(path));
}

// ---- JSONL ------------------------------------------------------------------

std::vector<CorpusDoc> parse_corpus_jsonl(std::string_view text) {
  std::vector<CorpusDoc> docs;
  std::unordered_set<std::string> seen;
  for_each_json_line(text, "corpus", [&](const json& j, const std::string& where) {
    CorpusDoc doc;
    const auto it = j.find("id");
    if (it == j.end()) throw ParseError(where + ": missing \"id\"");
    doc.id = doc_id_of(*it, where);
    doc.token_ids = token_ids_of(j, "token_ids", where);
    if (!seen.insert(doc.id).second) {
      throw ValidationError(where + ": duplicate id \"" + doc.id + "\"");
    }
    docs.push_back(std::move(doc));
  });
  return docs;
}

std::string format_corpus_jsonl(std::span<const CorpusDoc> docs) {
  std::string out;
  for (const auto& doc : docs) {
    out += json{{"id", doc.id}, {"token_ids", doc.token_ids}}.dump();
    out += '\n';
  }
  return out;
}

std::vector<TrainingRecord> parse_training_jsonl(std::string_view text) {
  std::vector<TrainingRecord> records;
  for_each_json_line(text, "training data", [&](const json& j, const std::string& where) {
    TrainingRecord rec;
    rec.query = token_ids_of(j, "query", where);
    const auto pos = j.find("positive");
    if (pos == j.end()) throw ParseError(where + ": missing \"positive\"");
    rec.positive = doc_id_of(*pos, where);
    const auto neg = j.find("negatives");
    if (neg != j.end()) {
      if (!neg->is_array()) throw ParseError(where + ": \"negatives\" must be an array");
      for (const auto& n : *neg) rec.negatives.push_back(doc_id_of(n, where));
    }
    records.push_back(std::move(rec));
  });
  return records;
}

std::string format_training_jsonl(std::span<const TrainingRecord> records) {
  std::string out;
  for (const auto& rec : records) {
    out += json{{"query", rec.query}, {"positive", rec.positive}, {"negatives", rec.negatives}}
               .dump();
    out += '\n';
  }
  return out;
}

TrainingSet make_training_set(std::span<const CorpusDoc> corpus,
                              std::span<const TrainingRecord> records) {
  TrainingSet set;
  std::unordered_map<std::string, std::uint32_t> index;
  for (const auto& doc : corpus) {
    index.emplace(doc.id, static_cast<std::uint32_t>(set.documents.size()));
    set.document_ids.push_back(doc.id);
    set.documents.push_back(doc.token_ids);
  }
  const auto lookup = [&](const std::string& id, std::size_t rec) {
    const auto it = index.find(id);
    if (it == index.end()) {
      throw ValidationError("training record " + std::to_string(rec + 1) +
                            ": unknown document id \"" + id + "\"");
    }
    return it->second;
  };
  for (std::size_t i = 0; i < records.size(); ++i) {
    TrainingExample ex;
    ex.query = records[i].query;
    ex.positive = lookup(records[i].positive, i);
    for (const auto& n : records[i].negatives) ex.negatives.push_back(lookup(n, i));
    set.examples.push_back(std::move(ex));
  }
  return set;
}

// ---- EncoderConfig JSON -----------------------------------------------------

EncoderConfig encoder_config_from_json(std::string_view text, const EncoderConfig& base) {
  const std::string what = "encoder config";
  const json j = parse_json(text, what);
  if (!j.is_object()) throw ParseError(what + ": expected a JSON object");
  static const std::unordered_set<std::string> known = {
      "d_cls",        "d_agg",        "max_query_len", "max_passage_len", "pooling_variant",
      "pruning_kind", "include_cls",  "cls_bias",      "include_sep",     "sep_token_id"};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ParseError(what + ": unknown key \"" + key + "\"");
  }
  EncoderConfig cfg = base;
  if (j.contains("d_cls")) cfg.d_cls = get_as<std::size_t>(j, "d_cls", what);
  if (j.contains("d_agg")) cfg.d_agg = get_as<std::size_t>(j, "d_agg", what);
  if (j.contains("max_query_len")) {
    cfg.max_query_len = get_as<std::size_t>(j, "max_query_len", what);
  }
  if (j.contains("max_passage_len")) {
    cfg.max_passage_len = get_as<std::size_t>(j, "max_passage_len", what);
  }
  try {
    if (j.contains("pooling_variant")) {
      cfg.pooling_variant = parse_pooling_variant(get_as<std::string>(j, "pooling_variant", what));
    }
    if (j.contains("pruning_kind")) {
      cfg.pruning_kind = parse_pruning_kind(get_as<std::string>(j, "pruning_kind", what));
    }
  } catch (const InvalidArgument& e) {
    throw ParseError(what + ": " + e.what());
  }
  if (j.contains("include_cls")) cfg.include_cls = get_as<bool>(j, "include_cls", what);
  if (j.contains("cls_bias")) cfg.cls_bias = get_as<bool>(j, "cls_bias", what);
  if (j.contains("include_sep")) cfg.pooling.include_sep = get_as<bool>(j, "include_sep", what);
  if (j.contains("sep_token_id")) {
    cfg.pooling.sep_token_id = get_as<std::uint32_t>(j, "sep_token_id", what);
  }
  return cfg;
}

std::string encoder_config_to_json(const EncoderConfig& cfg) {
  json j;
  j["d_cls"] = cfg.d_cls;
  j["d_agg"] = cfg.d_agg;
  j["max_query_len"] = cfg.max_query_len;
  j["max_passage_len"] = cfg.max_passage_len;
  j["pooling_variant"] = to_string(cfg.pooling_variant);
  j["pruning_kind"] = to_string(cfg.pruning_kind);
  j["include_cls"] = cfg.include_cls;
  j["cls_bias"] = cfg.cls_bias;
  j["include_sep"] = cfg.pooling.include_sep;
  j["sep_token_id"] = cfg.pooling.sep_token_id;
  return j.dump(2) + "\n";
}

}  // namespace textagg
