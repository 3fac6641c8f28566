// Copyright (C) 2026 The spdr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Runs CLI subcommands in-process inside a working directory, and the
// synthetic end-to-end chain used by the CLI and acceptance suites.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "run.hpp"
#include "spdr/io.hpp"

namespace spdr::test {

struct StepResult {
  std::vector<std::string> args;
  int code = 0;
  std::string out;
  std::string err;
  double seconds = 0.0;
};

class CliRunner {
 public:
  explicit CliRunner(std::filesystem::path dir) : dir_(std::move(dir)) {}

  /// Runs one subcommand with the working directory set to dir().
  StepResult operator()(std::vector<std::string> args) {
    const auto saved = std::filesystem::current_path();
    std::filesystem::current_path(dir_);
    std::ostringstream out, err;
    const auto start = std::chrono::steady_clock::now();
    StepResult r{args, 0, {}, {}, 0.0};
    try {
      r.code = cli::run(args, out, err);
    } catch (...) {
      std::filesystem::current_path(saved);
      throw;
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::filesystem::current_path(saved);
    r.out = out.str();
    r.err = err.str();
    return r;
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

struct ChainConfig {
  std::uint64_t seed = 42;
  int sae_epochs = 30;
  int bi_epochs = 50;
};

/// synth -> train-words -> embed-captions -> train-biencoder -> encode-corpus
/// -> index -> build-eval -> exclude (sr, avg_emb) -> evaluate -> compare.
inline std::vector<std::vector<std::string>> e2e_commands(const ChainConfig& c) {
  const std::string bi_shape = "--bi.latent_dim=64";
  const std::string top_t = "--bi.top_t=4";
  return {
      {"synth", "--synth.seed=" + std::to_string(c.seed), "--io.out_dir=data"},
      {"train-words", "--sae.latent_dim=64", "--sae.batch_size=32",
       "--sae.epochs=" + std::to_string(c.sae_epochs), "--io.words=data/words.txt",
       "--io.sae_checkpoint=sae.ck", "--io.word_sparse=words.semb", "--io.trace=sae.trace"},
      {"embed-captions", "--io.captions=data/captions.jsonl", "--io.word_sparse=words.semb",
       "--io.caption_emb=captions.semb"},
      {"train-biencoder", bi_shape, top_t, "--bi.epochs=" + std::to_string(c.bi_epochs),
       "--io.images=data/images.demb", "--io.texts=data/texts.demb",
       "--io.captions=data/captions.jsonl", "--io.caption_emb=captions.semb",
       "--io.bi_checkpoint=bi.ck", "--io.trace=bi.trace"},
      {"encode-corpus", bi_shape, top_t, "--io.bi_checkpoint=bi.ck",
       "--io.dense=data/images.demb", "--io.sparse=images.semb"},
      {"index", "--io.sparse=images.semb", "--io.index=images.sidx"},
      {"build-eval", "--eval.min_co=5", "--eval.min_excl=5", "--io.labels=data/labels.jsonl",
       "--io.queries=queries.jsonl"},
      {"exclude", "--retrieval.method=sr", bi_shape, top_t, "--io.queries=queries.jsonl",
       "--io.index=images.sidx", "--io.bi_checkpoint=bi.ck",
       "--io.label_dense=data/label_dense.demb", "--io.word_sparse=words.semb",
       "--io.run=sr.tsv"},
      {"exclude", "--retrieval.method=avg_emb", "--io.queries=queries.jsonl",
       "--io.images=data/images.demb", "--io.label_dense=data/label_dense.demb",
       "--io.run=avg.tsv"},
      {"evaluate", "--io.run=sr.tsv", "--io.queries=queries.jsonl", "--io.report=sr.txt",
       "--io.report_json=sr.json"},
      {"evaluate", "--io.run=avg.tsv", "--io.queries=queries.jsonl", "--io.report=avg.txt",
       "--io.report_json=avg.json"},
      {"compare", "--io.run=sr.tsv", "--io.run_b=avg.tsv", "--io.queries=queries.jsonl",
       "--io.report=compare.txt", "--io.report_json=compare.json"},
  };
}

/// Relative path -> sha256 of every regular file under `dir`.
inline std::map<std::string, std::string> hash_tree(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) {
      out[std::filesystem::relative(e.path(), dir).generic_string()] =
          cli::sha256_hex(read_file(e.path()));
    }
  }
  return out;
}

}  // namespace spdr::test
