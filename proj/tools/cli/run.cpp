// Copyright (C) 2026 The spdr Authors
// SPDX-License-Identifier: Apache-2.0
#include "run.hpp"

#include <openssl/evp.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "config.hpp"
#include "spdr/spdr.hpp"

namespace spdr::cli {

namespace fs = std::filesystem;

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

void configure_logging() {
  const char* env = std::getenv("SPDR_LOG");
  const std::string level = env ? env : "info";
  if (!spdlog::get("spdr")) spdlog::set_default_logger(spdlog::stderr_color_mt("spdr"));
  spdlog::set_level(spdlog::level::from_str(level));
  spdlog::set_pattern("[%l] %v");
}

namespace {

// Per-run bookkeeping: hashed inputs, staged outputs, manifest.
class Context {
 public:
  explicit Context(const RunConfig& rc) : rc(rc) {}

  const RunConfig& rc;

  fs::path require(std::string_view key) const {
    if (!rc.has(key)) throw UsageError("missing required --" + std::string(key) + "=PATH");
    return fs::path(rc.text(key));
  }

  std::optional<fs::path> optional_path(std::string_view key) const {
    if (!rc.has(key)) return std::nullopt;
    return fs::path(rc.text(key));
  }

  template <class Decode>
  auto load_path(const fs::path& path, Decode&& decode) {
    const std::string content = read_file(path);
    inputs_.emplace_back(path.string(), sha256_hex(content));
    try {
      return decode(std::string_view(content));
    } catch (const Error& e) {
      throw Error(path.string() + ": " + e.what());
    }
  }

  template <class Decode>
  auto load(std::string_view key, Decode&& decode) {
    return load_path(require(key), std::forward<Decode>(decode));
  }

  void output_path(const fs::path& path, std::string bytes) {
    if (!primary_) primary_ = path;
    stage_.put(path, std::move(bytes));
  }

  void output(std::string_view key, std::string bytes) { output_path(require(key), std::move(bytes)); }

  void set_manifest_dir(fs::path dir) { manifest_dir_ = std::move(dir); }

  void commit(std::string_view subcommand) {
    fs::path manifest;
    if (rc.has("io.manifest")) {
      manifest = rc.text("io.manifest");
    } else if (manifest_dir_) {
      manifest = *manifest_dir_ / "manifest.jsonl";
    } else if (primary_) {
      manifest = *primary_;
      manifest += ".manifest.jsonl";
    } else {
      throw UsageError("no outputs to record");
    }
    std::string lines;
    auto line = [&](const nlohmann::ordered_json& j) { lines += j.dump() + "\n"; };
    line({{"subcommand", subcommand}});
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    for (const auto& [k, v] : rc.values()) config[k] = v;
    line({{"config", config}});
    for (const auto& [path, hash] : inputs_) line({{"input", path}, {"sha256", hash}});
    for (const auto& [path, bytes] : stage_.files()) {
      line({{"output", path.string()}, {"sha256", sha256_hex(bytes)}});
    }
    stage_.put(manifest, std::move(lines));
    for (const auto& [path, bytes] : stage_.files()) {
      spdlog::info("writing {} ({} bytes)", path.string(), bytes.size());
    }
    stage_.commit();
  }

 private:
  std::vector<std::pair<std::string, std::string>> inputs_;
  OutputStage stage_;
  std::optional<fs::path> primary_;
  std::optional<fs::path> manifest_dir_;
};

std::string trace_header(std::initializer_list<const char*> cols) {
  std::string out;
  for (const char* c : cols) out += (out.empty() ? "" : "\t") + std::string(c);
  return out + "\n";
}

// ---------------------------------------------------------------------------

void train_words(Context& ctx) {
  const auto config = sae_config(ctx.rc);
  const auto table = ctx.load("io.words", parse_word_vectors);
  if (table.duplicate_count() > 0) {
    spdlog::warn("{} duplicate tokens ignored (kept first occurrence)", table.duplicate_count());
  }
  spdlog::info("word vectors: {} tokens, m={}", table.size(), table.dim());
  const auto result = sae_train(table, config);
  std::string trace = trace_header({"epoch", "rl", "asl", "psl", "total"});
  for (const auto& e : result.trace) {
    spdlog::debug("epoch {}: rl={:.6f} asl={:.6f} psl={:.6f} total={:.6f}", e.epoch, e.loss.rl,
                  e.loss.asl, e.loss.psl, e.loss.total);
    trace += std::to_string(e.epoch) + "\t" + format_score(e.loss.rl) + "\t" +
             format_score(e.loss.asl) + "\t" + format_score(e.loss.psl) + "\t" +
             format_score(e.loss.total) + "\n";
  }
  const auto sparse = export_word_sparse(result.model, table);
  spdlog::info("final loss {:.6f}; mean density {:.4f}", result.trace.back().loss.total,
               sparse.mean_density());
  ctx.output("io.sae_checkpoint", encode_sae_checkpoint(result.model, ctx.rc.dump("sae.")));
  ctx.output("io.word_sparse", encode_sparse_set(sparse));
  if (ctx.rc.has("io.trace")) ctx.output("io.trace", std::move(trace));
}

void embed_captions_cmd(Context& ctx) {
  const auto words = ctx.load("io.word_sparse", decode_sparse_set);
  const auto captions = ctx.load("io.captions", parse_captions);
  const auto embs = embed_captions(captions, words);
  std::size_t oov = 0, all_oov = 0;
  for (const auto& e : embs) {
    oov += e.oov_count;
    all_oov += e.all_oov ? 1 : 0;
  }
  spdlog::info("{} captions; {} out-of-vocabulary tokens; {} captions with no known token",
               embs.size(), oov, all_oov);
  ctx.output("io.caption_emb", encode_sparse_set(caption_embedding_set(embs, words.dim())));
}

void train_biencoder(Context& ctx) {
  const auto config = bi_config(ctx.rc);
  const auto images = ctx.load("io.images", decode_dense_set);
  const auto texts = ctx.load("io.texts", decode_dense_set);
  const auto captions = ctx.load("io.captions", parse_captions);
  const auto zc = ctx.load("io.caption_emb", decode_sparse_set);
  const auto result = bi_train(images, texts, zc, captions, config);
  std::string trace = trace_header({"epoch", "rl", "cl", "total"});
  for (const auto& e : result.trace) {
    spdlog::debug("epoch {}: rl={:.6f} cl={:.6f} total={:.6f}", e.epoch, e.loss.rl, e.loss.cl,
                  e.loss.total);
    trace += std::to_string(e.epoch) + "\t" + format_score(e.loss.rl) + "\t" +
             format_score(e.loss.cl) + "\t" + format_score(e.loss.total) + "\n";
  }
  spdlog::info("loss {:.6f} -> {:.6f}", result.trace.front().loss.total,
               result.trace.back().loss.total);
  ctx.output("io.bi_checkpoint", encode_bi_checkpoint(result.model, ctx.rc.dump("bi.")));
  if (ctx.rc.has("io.trace")) ctx.output("io.trace", std::move(trace));
}

void encode_corpus_cmd(Context& ctx) {
  const auto config = bi_config(ctx.rc);
  const auto ck = ctx.load("io.bi_checkpoint", decode_bi_checkpoint);
  const auto dense = ctx.load("io.dense", decode_dense_set);
  const Modality modality =
      ctx.rc.text("encode.modality") == "text" ? Modality::text : Modality::image;
  std::optional<SparseEmbeddingSet> zc;
  if (auto p = ctx.optional_path("io.caption_emb")) {
    auto captions = ctx.load_path(*p, decode_sparse_set);
    zc = modality == Modality::image ? pool_captions_by_image(captions) : std::move(captions);
  }
  const auto sparse = encode_corpus(ck.model, modality, dense, zc ? &*zc : nullptr, config.top_t,
                                    config.active_threshold);
  spdlog::info("{} records; mean density {:.4f}", sparse.size(), sparse.mean_density());
  ctx.output("io.sparse", encode_sparse_set(sparse));
}

void index_cmd(Context& ctx) {
  const auto set = ctx.load("io.sparse", decode_sparse_set);
  const auto index = build_index(set);
  spdlog::info("{} records, {} postings", index.size(), index.total_postings());
  ctx.output("io.index", encode_index(index));
}

// Text-side label queries for the sparse method.
class LabelQueries {
 public:
  explicit LabelQueries(Context& ctx) : config_(bi_config(ctx.rc)) {
    model_ = ctx.load("io.bi_checkpoint", decode_bi_checkpoint).model;
    labels_ = ctx.load("io.label_dense", decode_dense_set);
    if (auto p = ctx.optional_path("io.word_sparse")) words_ = ctx.load_path(*p, decode_sparse_set);
  }

  const SparseVector& get(const std::string& label) {
    auto it = cache_.find(label);
    if (it == cache_.end()) {
      it = cache_
               .emplace(label, label_query_vector(label, words_ ? &*words_ : nullptr, model_,
                                                  labels_, config_.top_t,
                                                  config_.active_threshold))
               .first;
    }
    return it->second;
  }

 private:
  BiTrainConfig config_;
  BiEncoderModel<float> model_;
  DenseEmbeddingSet labels_;
  std::optional<SparseEmbeddingSet> words_;
  std::map<std::string, SparseVector> cache_;
};

std::vector<std::string> split_labels(const std::string& list) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const auto comma = list.find(',', pos);
    std::string item = list.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!item.empty()) out.push_back(std::move(item));
    pos = comma == std::string::npos ? list.size() + 1 : comma + 1;
  }
  return out;
}

void query_cmd(Context& ctx) {
  const auto labels = split_labels(ctx.rc.text("query.labels"));
  if (labels.empty()) throw UsageError("missing required --query.labels=LABEL[,LABEL...]");
  const auto params = exclusion_params(ctx.rc);
  const auto index = ctx.load("io.index", decode_index);
  LabelQueries queries(ctx);
  std::string run;
  for (const auto& label : labels) append_run(run, label, search(index, queries.get(label), params.k_return));
  ctx.output("io.run", std::move(run));
}

void exclude_cmd(Context& ctx) {
  const auto params = exclusion_params(ctx.rc);
  const auto queries = ctx.load("io.queries", parse_queries);
  std::string run;
  std::size_t empty = 0;
  if (ctx.rc.text("retrieval.method") == "avg_emb") {
    const auto images = ctx.load("io.images", decode_dense_set);
    const auto labels = ctx.load("io.label_dense", decode_dense_set);
    for (const auto& q : queries) {
      const auto list = avg_emb_exclude(images, labels, q.include, q.exclude, params);
      empty += list.empty_dims ? 1 : 0;
      append_run(run, q.id(), list);
    }
  } else {
    const auto index = ctx.load("io.index", decode_index);
    LabelQueries labels(ctx);
    for (const auto& q : queries) {
      const auto r = exclude_pipeline(index, labels.get(q.include), labels.get(q.exclude), params);
      spdlog::debug("{}: |D1|={} |D2|={}", q.id(), r.include_dims.size(), r.exclude_dims.size());
      empty += r.ranked.empty_dims ? 1 : 0;
      append_run(run, q.id(), r.ranked);
    }
  }
  if (empty > 0) spdlog::warn("{} queries produced an empty result (no dimension left)", empty);
  spdlog::info("{} queries answered with method {}", queries.size(), ctx.rc.text("retrieval.method"));
  ctx.output("io.run", std::move(run));
}

void build_eval(Context& ctx) {
  const auto labels = ctx.load("io.labels", parse_labels);
  const auto queries =
      build_exclusion_queries(labels, ctx.rc.count("eval.min_co"), ctx.rc.count("eval.min_excl"));
  spdlog::info("{} labeled images; {} queries", labels.size(), queries.size());
  ctx.output("io.queries", encode_queries(queries));
}

void evaluate_cmd(Context& ctx) {
  const auto metrics = metric_specs(ctx.rc.text("eval.metrics"));
  const auto queries = ctx.load("io.queries", parse_queries);
  const auto run = ctx.load("io.run", parse_run);
  const auto report = evaluate_run(run, queries, metrics);
  if (report.missing_count > 0) {
    spdlog::warn("{} queries had no ranked list and score 0", report.missing_count);
  }
  for (std::size_t m = 0; m < metrics.size(); ++m) {
    spdlog::info("{} = {:.6f}", metrics[m].name(), report.means[m]);
  }
  ctx.output("io.report", encode_report_text(report));
  if (ctx.rc.has("io.report_json")) ctx.output("io.report_json", encode_report_json(report));
}

void compare_cmd(Context& ctx) {
  const auto metrics = metric_specs(ctx.rc.text("eval.metrics"));
  const double alpha = ctx.rc.real("eval.alpha");
  if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("eval.alpha must lie in (0,1)");
  const auto queries = ctx.load("io.queries", parse_queries);
  const auto a = evaluate_run(ctx.load("io.run", parse_run), queries, metrics);
  const auto b = evaluate_run(ctx.load("io.run_b", parse_run), queries, metrics);
  if (queries.size() < 2) throw Error("compare needs at least 2 queries");

  std::string text = trace_header({"metric", "mean_a", "mean_b", "t", "df", "p", "verdict"});
  nlohmann::ordered_json j;
  j["queries"] = queries.size();
  j["alpha"] = alpha;
  j["run_a"] = ctx.rc.text("io.run");
  j["run_b"] = ctx.rc.text("io.run_b");
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (std::size_t m = 0; m < metrics.size(); ++m) {
    const auto name = metrics[m].name();
    const auto t = paired_t_test(a.column(name), b.column(name), alpha);
    std::string verdict;
    if (t.degenerate) {
      verdict = "degenerate";
    } else if (!t.significant) {
      verdict = "not significant";
    } else {
      verdict = t.mean_difference > 0 ? "a better (significant)" : "b better (significant)";
    }
    spdlog::info("{}: a={:.6f} b={:.6f} -> {}", name, a.means[m], b.means[m], verdict);
    text += name + "\t" + format_score(a.means[m]) + "\t" + format_score(b.means[m]) + "\t" +
            (t.degenerate ? "-" : format_score(t.t_statistic)) + "\t" +
            std::to_string(t.degrees_of_freedom) + "\t" +
            (t.p_value ? format_score(*t.p_value) : "-") + "\t" + verdict + "\n";
    nlohmann::ordered_json row;
    row["metric"] = name;
    row["mean_a"] = a.means[m];
    row["mean_b"] = b.means[m];
    row["t"] = t.degenerate ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(t.t_statistic);
    row["df"] = t.degrees_of_freedom;
    row["p"] = t.p_value ? nlohmann::ordered_json(*t.p_value) : nlohmann::ordered_json(nullptr);
    row["significant"] = t.significant;
    row["degenerate"] = t.degenerate;
    row["verdict"] = verdict;
    rows.push_back(std::move(row));
  }
  j["metrics"] = rows;
  ctx.output("io.report", std::move(text));
  if (ctx.rc.has("io.report_json")) ctx.output("io.report_json", j.dump(2) + "\n");
}

void synth_cmd(Context& ctx) {
  const auto config = synth_config(ctx.rc);
  const fs::path dir = ctx.require("io.out_dir");
  const auto corpus = synth_corpus(config);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string());
  ctx.set_manifest_dir(dir);
  ctx.output_path(dir / "images.demb", encode_dense_set(corpus.images));
  ctx.output_path(dir / "texts.demb", encode_dense_set(corpus.texts));
  ctx.output_path(dir / "label_dense.demb", encode_dense_set(corpus.label_dense));
  ctx.output_path(dir / "captions.jsonl", encode_captions(corpus.captions));
  ctx.output_path(dir / "labels.jsonl", encode_labels(corpus.labels));
  ctx.output_path(dir / "words.txt", encode_word_vectors(corpus.words));
  spdlog::info("{} images, {} captions, {} labels, {} words", corpus.images.size(),
               corpus.captions.size(), corpus.label_names.size(), corpus.words.size());
}

struct Command {
  const char* name;
  void (*fn)(Context&);
  const char* summary;
};

constexpr Command kCommands[] = {
    {"train-words", train_words, "io.words -> io.sae_checkpoint, io.word_sparse [io.trace]"},
    {"embed-captions", embed_captions_cmd, "io.captions, io.word_sparse -> io.caption_emb"},
    {"train-biencoder", train_biencoder,
     "io.images, io.texts, io.captions, io.caption_emb -> io.bi_checkpoint [io.trace]"},
    {"encode-corpus", encode_corpus_cmd,
     "io.bi_checkpoint, io.dense [io.caption_emb] -> io.sparse"},
    {"index", index_cmd, "io.sparse -> io.index"},
    {"query", query_cmd,
     "io.index, io.bi_checkpoint, io.label_dense [io.word_sparse], query.labels -> io.run"},
    {"exclude", exclude_cmd,
     "io.queries + (sr: io.index, io.bi_checkpoint, io.label_dense [io.word_sparse] | "
     "avg_emb: io.images, io.label_dense) -> io.run"},
    {"build-eval", build_eval, "io.labels -> io.queries"},
    {"evaluate", evaluate_cmd, "io.run, io.queries -> io.report [io.report_json]"},
    {"compare", compare_cmd, "io.run, io.run_b, io.queries -> io.report [io.report_json]"},
    {"synth", synth_cmd, "-> io.out_dir/{images,texts,label_dense}.demb, captions, labels, words"},
};

}  // namespace

std::string usage() {
  std::string out =
      "usage: spdr <subcommand> [--config=FILE] [--section.key=value ...]\n\nsubcommands:\n";
  for (const auto& c : kCommands) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "  %-16s %s\n", c.name, c.summary);
    out += buf;
  }
  out += "\nkeys (default):\n";
  for (const auto& s : config_schema()) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "  %-26s %s%s%s%s\n", s.key.c_str(), s.help.c_str(),
                  s.fallback.empty() ? "" : " (", s.fallback.c_str(),
                  s.fallback.empty() ? "" : ")");
    out += buf;
  }
  out += "\nSPDR_LOG sets log verbosity (trace, debug, info, warn, error, off).\n";
  return out;
}

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  if (args.empty() || args[0] == "--help" || args[0] == "-h" || args[0] == "help") {
    (args.empty() ? err : out) << usage();
    return args.empty() ? kExitUsage : kExitOk;
  }
  const Command* command = nullptr;
  for (const auto& c : kCommands) {
    if (args[0] == c.name) command = &c;
  }
  if (!command) {
    err << "unknown subcommand '" << args[0] << "'\n\n" << usage();
    return kExitUsage;
  }
  try {
    std::optional<fs::path> file;
    std::vector<std::string> flags;
    for (std::size_t i = 1; i < args.size(); ++i) {
      if (args[i].rfind("--config=", 0) == 0) {
        file = args[i].substr(9);
      } else {
        flags.push_back(args[i]);
      }
    }
    const RunConfig rc = parse_config(file, flags);
    spdlog::info("spdr {}", command->name);
    for (const auto& [k, v] : rc.values()) spdlog::info("  {}={}", k, v);
    Context ctx(rc);
    command->fn(ctx);
    ctx.commit(command->name);
    return kExitOk;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace spdr::cli
