// textagg command-line tool.

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "textagg/analysis.hpp"
#include "textagg/binary_io.hpp"
#include "textagg/encoder.hpp"
#include "textagg/error.hpp"
#include "textagg/eval.hpp"
#include "textagg/index.hpp"
#include "textagg/io_formats.hpp"
#include "textagg/parallel.hpp"
#include "textagg/pipeline.hpp"
#include "textagg/synth.hpp"
#include "textagg/tensor_container.hpp"
#include "textagg/toy_encoder.hpp"
#include "textagg/training.hpp"

namespace {

using namespace textagg;

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kFormat = 3,
  kValidation = 4,
  kIo = 5,
};

std::vector<std::size_t> parse_size_list(const std::string& text, const char* what) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != item.size()) {
      throw InvalidArgument(std::string(what) + ": \"" + item + "\" is not a count");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw InvalidArgument(std::string(what) + ": empty list");
  return out;
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Encoder settings shared by encode, train-toy and embed-toy.
struct ConfigFlags {
  std::string config_path;
  std::optional<std::size_t> d_cls;
  std::optional<std::size_t> d_agg;
  std::optional<std::string> pooling;
  std::optional<std::string> pruning;
  std::optional<std::size_t> max_query_len;
  std::optional<std::size_t> max_passage_len;
  bool no_cls = false;
  bool no_cls_bias = false;
  bool include_sep = false;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "EncoderConfig JSON file");
    app->add_option("--d-cls", d_cls, "CLS projection width");
    app->add_option("--d-agg", d_agg, "Aggregated width (number of slices)");
    app->add_option("--pooling", pooling, "full|unit_weight|no_mlm|average|repbert");
    app->add_option("--pruning", pruning, "semi|full|linear|mean");
    app->add_option("--max-query-len", max_query_len);
    app->add_option("--max-passage-len", max_passage_len);
    app->add_flag("--no-cls", no_cls, "Drop the CLS part");
    app->add_flag("--no-cls-bias", no_cls_bias, "CLS projection without bias");
    app->add_flag("--include-sep", include_sep, "Pool SEP positions");
  }

  EncoderConfig resolve(EncoderConfig cfg) const {
    if (!config_path.empty()) cfg = encoder_config_from_json(read_text_file(config_path), cfg);
    if (d_cls) cfg.d_cls = *d_cls;
    if (d_agg) cfg.d_agg = *d_agg;
    if (pooling) cfg.pooling_variant = parse_pooling_variant(*pooling);
    if (pruning) cfg.pruning_kind = parse_pruning_kind(*pruning);
    if (max_query_len) cfg.max_query_len = *max_query_len;
    if (max_passage_len) cfg.max_passage_len = *max_passage_len;
    if (no_cls) cfg.include_cls = false;
    if (no_cls_bias) cfg.cls_bias = false;
    if (include_sep) cfg.pooling.include_sep = true;
    cfg.validate();
    return cfg;
  }
};

SequenceRole parse_role(const std::string& role) {
  if (role == "query") return SequenceRole::kQuery;
  if (role == "passage") return SequenceRole::kPassage;
  throw InvalidArgument("role must be query or passage, got \"" + role + "\"");
}

// ---- partition ----

struct PartitionCmd {
  std::size_t vocab_size = 0;
  std::size_t d = 0;
  std::uint64_t seed = 0;
  std::string out;

  void attach(CLI::App& root) {
    auto* app = root.add_subcommand("partition", "Write a seeded slice partition as JSON");
    app->add_option("--vocab-size", vocab_size)->required();
    app->add_option("--d", d)->required();
    app->add_option("--seed", seed);
    app->add_option("--out", out)->required();
    app->callback([this] { write_partition(out, make_partition(vocab_size, d, seed)); });
  }
};

// ---- encode ----

struct EncodeCmd {
  std::string input;
  std::string heads_path;
  std::string partition_path;
  std::string out;
  std::string role = "passage";
  std::optional<unsigned> threads;
  ConfigFlags flags;

  void attach(CLI::App& root) {
    auto* app = root.add_subcommand("encode", "Encode an embedding dump into retrieval vectors");
    app->add_option("--input", input, "EmbeddingDump file")->required();
    app->add_option("--mlm-head", heads_path, "Tensor container with the heads")->required();
    app->add_option("--partition", partition_path, "Partition JSON");
    app->add_option("--out", out)->required();
    app->add_option("--role", role, "query or passage (length limit)");
    app->add_option("--threads", threads);
    flags.attach(app);
    app->callback([this] { run(); });
  }

  void run() const {
    const EncoderConfig cfg = flags.resolve({});
    const EmbeddingDump dump = EmbeddingDump::read(input);
    dump.validate();
    const EncoderHeads heads = EncoderHeads::from_container(TensorContainer::read(heads_path));
    if (heads.mlm.vocab_size() != dump.vocab_size) {
      throw ValidationError("encode: dump vocab_size " + std::to_string(dump.vocab_size) +
                            " differs from the mlm head's " +
                            std::to_string(heads.mlm.vocab_size()));
    }
    std::optional<SlicePartition> part;
    if (cfg.uses_partition()) {
      if (partition_path.empty()) throw InvalidArgument("encode: this config needs --partition");
      part = read_partition(partition_path);
      if (part->d() != cfg.d_agg) {
        throw ValidationError("encode: partition has " + std::to_string(part->d()) +
                              " slices but d_agg is " + std::to_string(cfg.d_agg));
      }
    }
    const SequenceRole r = parse_role(role);
    std::vector<ConcatEmbedding> embedded(dump.records.size());
    parallel_for(dump.records.size(), resolve_threads(threads), [&](std::size_t i) {
      embedded[i] = encode(dump.records[i].sequence, heads, part ? &*part : nullptr, cfg, r);
    });
    VectorSet set;
    set.dim = static_cast<std::uint32_t>(cfg.dim());
    set.d_cls = static_cast<std::uint32_t>(cfg.cls_dim());
    set.partition = part ? part->fingerprint() : kNoPartition;
    set.vectors = Matrix<float>(0, set.dim);
    for (std::size_t i = 0; i < embedded.size(); ++i) set.add(dump.records[i].id, embedded[i]);
    set.write(out);
  }
};

// ---- index ----

struct IndexCmd {
  std::string vectors;
  std::string build_out;
  std::string index_path;
  std::string queries;
  std::string search_out;
  std::size_t k = 1000;
  std::string tag = "textagg";
  std::optional<unsigned> threads;

  void attach(CLI::App& root) {
    auto* app = root.add_subcommand("index", "Build or search a flat index");
    app->require_subcommand(1);
    auto* build = app->add_subcommand("build", "Index a vector file");
    build->add_option("--vectors", vectors)->required();
    build->add_option("--out", build_out)->required();
    build->callback([this] {
      write_index(build_out, build_index(VectorSet::read(vectors)));
    });
    auto* search = app->add_subcommand("search", "Top-k search, TREC run output");
    search->add_option("--index", index_path)->required();
    search->add_option("--queries", queries, "Query vector file")->required();
    search->add_option("--k", k);
    search->add_option("--out", search_out)->required();
    search->add_option("--tag", tag, "Run tag column");
    search->add_option("--threads", threads);
    search->callback([this] {
      if (k == 0) throw InvalidArgument("--k must be >= 1");
      const FlatIndex index = read_index(index_path);
      const RunFile run = search_all(index, VectorSet::read(queries), k,
                                     resolve_threads(threads), tag);
      write_text_file(search_out, format_run(run));
    });
  }
};

// ---- train-toy ----

struct TrainToyCmd {
  std::string data;
  std::string corpus;
  std::string partition_path;
  std::string partition_out;
  std::string out;
  std::string loss_trace;
  std::size_t epochs = 3;
  std::optional<std::size_t> steps;
  double lr = 5e-6;
  double momentum = 0.0;
  double clip = 0.0;
  std::size_t batch_size = 8;
  std::size_t negatives = 7;
  std::uint64_t seed = 0;
  double lambda1 = 0.5;
  double lambda2 = 0.5;
  std::size_t vocab_size = 128;
  std::size_t d_model = 16;
  double init_scale = 0.05;
  std::vector<std::string> group_init;
  std::optional<unsigned> threads;
  ConfigFlags flags;

  void attach(CLI::App& root) {
    auto* app = root.add_subcommand("train-toy", "Contrastive training of the toy encoder");
    app->add_option("--data", data, "Training JSONL")->required();
    app->add_option("--corpus", corpus, "Corpus JSONL the document ids refer to")->required();
    app->add_option("--partition", partition_path, "Partition JSON (default: from --seed)");
    app->add_option("--partition-out", partition_out, "Write the partition used");
    app->add_option("--out", out, "Model tensor container")->required();
    app->add_option("--loss-trace", loss_trace, "Per-step loss CSV");
    app->add_option("--epochs", epochs);
    app->add_option("--steps", steps, "Step budget, overrides --epochs");
    app->add_option("--lr", lr);
    app->add_option("--momentum", momentum);
    app->add_option("--clip", clip, "Gradient norm limit, 0 disables");
    app->add_option("--batch-size", batch_size);
    app->add_option("--negatives", negatives, "Negatives per query");
    app->add_option("--seed", seed);
    app->add_option("--lambda1", lambda1, "Weight of the aggregated-only loss");
    app->add_option("--lambda2", lambda2, "Weight of the CLS-only loss");
    app->add_option("--vocab-size", vocab_size);
    app->add_option("--d-model", d_model);
    app->add_option("--init-scale", init_scale);
    app->add_option("--group-init", group_init, "NAME=SCALE init override, repeatable");
    app->add_option("--threads", threads);
    flags.attach(app);
    app->callback([this] { run(); });
  }

  void run() const {
    ToyEncoderConfig tc;
    tc.vocab_size = vocab_size;
    tc.d_model = d_model;
    tc.init_scale = init_scale;
    tc.seed = seed;
    tc.encoder = flags.resolve(toy_encoder_defaults());
    tc.max_positions = std::max(tc.encoder.max_query_len, tc.encoder.max_passage_len) + 1;
    for (const auto& g : group_init) {
      const auto eq = g.find('=');
      if (eq == std::string::npos) throw InvalidArgument("--group-init expects NAME=SCALE");
      double scale = 0.0;
      try {
        scale = std::stod(g.substr(eq + 1));
      } catch (const std::exception&) {
        throw InvalidArgument("--group-init: bad scale in \"" + g + "\"");
      }
      tc.group_init_scale[static_cast<std::size_t>(parse_param_id(g.substr(0, eq)))] = scale;
    }

    const auto docs = parse_corpus_jsonl(read_text_file(corpus));
    const TrainingSet set = make_training_set(docs, parse_training_jsonl(read_text_file(data)));
    std::optional<SlicePartition> part;
    if (tc.encoder.uses_partition()) {
      part = partition_path.empty() ? make_partition(vocab_size, tc.encoder.d_agg, seed)
                                    : read_partition(partition_path);
      if (!partition_out.empty()) write_partition(partition_out, *part);
    }

    TrainOptions opt;
    opt.epochs = epochs;
    opt.max_steps = steps;
    opt.learning_rate = lr;
    opt.momentum = momentum;
    opt.max_grad_norm = clip;
    opt.batch_size = batch_size;
    opt.negatives_per_query = negatives;
    opt.seed = seed;
    opt.weights = {lambda1, lambda2};
    opt.threads = resolve_threads(threads);
    const TrainResult result = train(ToyEncoder(tc), set, part ? &*part : nullptr, opt);
    result.encoder.to_container().write(out);
    if (!loss_trace.empty()) write_text_file(loss_trace, loss_trace_csv(result.trace));
    if (!result.trace.empty()) {
      std::fprintf(stderr, "steps %zu, loss %.6g -> %.6g\n", result.trace.size(),
                   result.trace.front().loss.total, result.trace.back().loss.total);
    }
  }
};

// ---- embed-toy ----

struct EmbedToyCmd {
  std::string model;
  std::string corpus;
  std::string partition_path;
  std::string out;
  std::string dump_out;
  std::string heads_out;
  std::string role = "passage";
  std::optional<unsigned> threads;

  void attach(CLI::App& root) {
    auto* app = root.add_subcommand(
        "embed-toy", "Run the toy encoder over a corpus JSONL (vectors, dump or heads)");
    app->add_option("--model", model)->required();
    app->add_option("--corpus", corpus)->required();
    app->add_option("--partition", partition_path);
    app->add_option("--out", out, "Vector file");
    app->add_option("--dump-out", dump_out, "EmbeddingDump of the contextualized tokens");
    app->add_option("--heads-out", heads_out, "Tensor container with the heads");
    app->add_option("--role", role, "query or passage (length limit)");
    app->add_option("--threads", threads);
    app->callback([this] { run(); });
  }

  void run() const {
    const ToyEncoder enc = ToyEncoder::from_container(TensorContainer::read(model));
    const auto& cfg = enc.config().encoder;
    if (!heads_out.empty()) {
      TensorContainer heads;
      enc.heads().append_to(heads);
      heads.write(heads_out);
    }
    if (out.empty() && dump_out.empty()) return;
    const auto docs = parse_corpus_jsonl(read_text_file(corpus));
    const std::size_t limit =
        parse_role(role) == SequenceRole::kQuery ? cfg.max_query_len : cfg.max_passage_len;
    for (const auto& d : docs) {
      if (d.token_ids.size() > limit) {
        throw ValidationError("embed-toy: \"" + d.id + "\" has " +
                              std::to_string(d.token_ids.size()) + " tokens, limit " +
                              std::to_string(limit));
      }
    }
    if (!dump_out.empty()) {
      EmbeddingDump dump;
      dump.d_model = static_cast<std::uint32_t>(enc.config().d_model);
      dump.vocab_size = static_cast<std::uint32_t>(enc.config().vocab_size);
      dump.max_len = static_cast<std::uint32_t>(limit);
      dump.producer = "textagg embed-toy";
      for (const auto& d : docs) dump.records.push_back({d.id, enc.forward(d.token_ids)});
      dump.write(dump_out);
    }
    if (!out.empty()) {
      std::optional<SlicePartition> part;
      if (cfg.uses_partition()) {
        if (partition_path.empty()) throw InvalidArgument("embed-toy: model needs --partition");
        part = read_partition(partition_path);
      }
      embed_corpus(enc, part ? &*part : nullptr, docs, resolve_threads(threads)).write(out);
    }
  }
};

// ---- eval ----

struct EvalCmd {
  std::string run_path;
  std::string qrels_path;
  std::string metrics = "rr@10,recall@1000,ndcg@10";
  bool linear_gain = false;

  void attach(CLI::App& root) {
    auto* app = root.add_subcommand("eval", "Score a TREC run against qrels");
    app->add_option("--run", run_path)->required();
    app->add_option("--qrels", qrels_path)->required();
    app->add_option("--metrics", metrics, "Comma list of rr@k, recall@k, ndcg@k, hit@k");
    app->add_flag("--linear-gain", linear_gain, "nDCG gain g instead of 2^g - 1");
    app->callback([this] { run(); });
  }

  void run() const {
    const auto specs = parse_metric_list(metrics);
    const RunFile run = parse_run(read_text_file(run_path));
    const Qrels qrels = parse_qrels(read_text_file(qrels_path));
    const Gain gain = linear_gain ? Gain::kLinear : Gain::kExponential;
    std::size_t skipped = 0;
    for (const auto& metric : specs) {
      const MetricResult r = evaluate(metric, run, qrels, gain);
      std::printf("%s\t%.6f\n", metric.name.c_str(), r.value);
      skipped = std::max(skipped, r.skipped);
    }
    std::printf("queries\t%zu\n", run.queries.size());
    std::printf("skipped\t%zu\n", skipped);
  }
};

// ---- analyze ----

struct AnalyzeCmd {
  std::size_t vocab_size = 4096;
  std::string d_values = "16,64,256,1024,4096";
  std::size_t partitions = 20;
  std::size_t pairs = 1000;
  std::size_t nonzeros = 64;
  std::uint64_t seed = 0;
  std::string pruners = "agg_plus,agg_star,linear_random";
  std::string out;
  std::optional<unsigned> threads;

  std::size_t c_vocab = 4096;
  std::size_t c_d = 64;
  std::size_t c_partitions = 4;
  std::size_t c_pairs = 1000;
  std::size_t c_nonzeros = 64;
  std::uint64_t c_seed = 0;

  void attach(CLI::App& root) {
    auto* app = root.add_subcommand("analyze", "Pruning approximation studies");
    app->require_subcommand(1);
    auto* approx = app->add_subcommand("approx-error", "Mean |v.v' - pruned.pruned'| per d");
    approx->add_option("--vocab-size", vocab_size);
    approx->add_option("--d", d_values, "Comma list of slice counts");
    approx->add_option("--seeds", partitions, "Random partitions per d");
    approx->add_option("--pairs", pairs, "Vector pairs in the ensemble");
    approx->add_option("--nonzeros", nonzeros, "Nonzeros per vector");
    approx->add_option("--seed", seed);
    approx->add_option("--pruners", pruners, "agg_plus,agg_star,linear_random");
    approx->add_option("--out", out, "CSV path (default stdout)");
    approx->add_option("--threads", threads);
    approx->callback([this] { run_approx(); });

    auto* cancel = app->add_subcommand("cancellation",
                                       "Opposite-sign share of misaligned slices");
    cancel->add_option("--vocab-size", c_vocab);
    cancel->add_option("--d", c_d);
    cancel->add_option("--seeds", c_partitions, "Random partitions");
    cancel->add_option("--pairs", c_pairs);
    cancel->add_option("--nonzeros", c_nonzeros);
    cancel->add_option("--seed", c_seed);
    cancel->add_option("--threads", threads);
    cancel->callback([this] {
      const auto s = cancellation_experiment({c_vocab, c_nonzeros, c_pairs, c_seed}, c_d,
                                             c_partitions, resolve_threads(threads));
      std::printf("aligned\t%zu\nopposite_sign\t%zu\nsame_sign\t%zu\nopposite_fraction\t%.6f\n",
                  s.aligned, s.opposite_sign, s.same_sign, s.opposite_fraction());
    });
  }

  void run_approx() const {
    ApproxErrorOptions opt;
    opt.ensemble = {vocab_size, nonzeros, pairs, seed};
    opt.d_values = parse_size_list(d_values, "--d");
    opt.partitions = partitions;
    opt.pruners.clear();
    for (const auto& p : split_commas(pruners)) opt.pruners.push_back(parse_pruner(p));
    opt.threads = resolve_threads(threads);
    const std::string csv = approx_error_csv(approx_error(opt));
    if (out.empty()) {
      std::fputs(csv.c_str(), stdout);
    } else {
      write_text_file(out, csv);
    }
  }
};

// ---- synth ----

struct SynthCmd {
  SynthOptions opt;
  std::string out_dir;

  void attach(CLI::App& root) {
    auto* app = root.add_subcommand("synth", "Generate the synthetic lexical-overlap task");
    app->add_option("--docs", opt.docs);
    app->add_option("--queries", opt.queries, "Evaluation queries");
    app->add_option("--train-queries", opt.train_queries);
    app->add_option("--vocab-size", opt.vocab_size);
    app->add_option("--negatives", opt.negatives);
    app->add_option("--min-doc-len", opt.min_doc_len);
    app->add_option("--max-doc-len", opt.max_doc_len);
    app->add_option("--min-query-len", opt.min_query_len);
    app->add_option("--max-query-len", opt.max_query_len);
    app->add_option("--zipf", opt.zipf_exponent);
    app->add_option("--seed", opt.seed);
    app->add_option("--out-dir", out_dir)->required();
    app->callback([this] { write_synth_task(make_synth_task(opt), out_dir); });
  }
};

int report(const char* kind, const std::exception& e, int code) {
  std::fprintf(stderr, "textagg: %s: %s\n", kind, e.what());
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Text aggregation retrieval toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "textagg 0.1.0");

  PartitionCmd partition;
  EncodeCmd encode_cmd;
  IndexCmd index;
  TrainToyCmd train_toy;
  EmbedToyCmd embed_toy;
  EvalCmd eval;
  AnalyzeCmd analyze;
  SynthCmd synth;
  partition.attach(app);
  encode_cmd.attach(app);
  index.attach(app);
  train_toy.attach(app);
  embed_toy.attach(app);
  eval.attach(app);
  analyze.attach(app);
  synth.attach(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  } catch (const IoError& e) {
    return report("io error", e, kIo);
  } catch (const BadMagicError& e) {
    return report("bad magic", e, kFormat);
  } catch (const BadVersionError& e) {
    return report("bad version", e, kFormat);
  } catch (const TruncatedError& e) {
    return report("truncated", e, kFormat);
  } catch (const SizeMismatchError& e) {
    return report("size mismatch", e, kFormat);
  } catch (const DuplicateNameError& e) {
    return report("duplicate name", e, kFormat);
  } catch (const ParseError& e) {
    return report("format error", e, kFormat);
  } catch (const EmptySequenceError& e) {
    return report("empty sequence", e, kValidation);
  } catch (const InvalidArgument& e) {
    return report("invalid argument", e, kValidation);
  } catch (const ValidationError& e) {
    return report("validation error", e, kValidation);
  } catch (const BuildError& e) {
    return report("build error", e, kValidation);
  } catch (const Error& e) {
    return report("error", e, kValidation);
  }
  return kOk;
}
