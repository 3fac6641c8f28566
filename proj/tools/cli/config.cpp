// Copyright (C) 2026 The spdr Authors
// SPDX-License-Identifier: Apache-2.0
#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "spdr/error.hpp"
#include "spdr/io.hpp"

namespace spdr::cli {

namespace {

KeySpec path_key(std::string key, std::string help) {
  return {std::move(key), ValueType::text, "", {}, std::move(help)};
}

std::vector<KeySpec> build_schema() {
  using T = ValueType;
  return {
      {"sae.latent_dim", T::count, "1000", {}, "word latent dimensionality d"},
      {"sae.target_sparsity", T::real, "0.15", {}, "target mean activation rho*"},
      {"sae.learning_rate", T::real, "0.05", {}, "SGD step size"},
      {"sae.epochs", T::integer, "30", {}, "training epochs"},
      {"sae.batch_size", T::count, "64", {}, "mini-batch size"},
      {"sae.seed", T::count, "0", {}, "initialization and shuffling seed"},

      {"bi.latent_dim", T::count, "1000", {}, "sparse latent dimensionality d"},
      {"bi.top_t", T::count, "64", {}, "top-t mask size"},
      {"bi.active_threshold", T::real, "0.1", {}, "caption dims at or above this join the mask"},
      {"bi.lambda", T::real, "1.0", {}, "contrastive loss weight"},
      {"bi.temperature", T::real, "0.07", {}, "softmax temperature"},
      {"bi.learning_rate", T::real, "0.05", {}, "SGD step size"},
      {"bi.epochs", T::integer, "50", {}, "training epochs"},
      {"bi.batch_size", T::count, "32", {}, "pairs per mini-batch"},
      {"bi.seed", T::count, "0", {}, "initialization and shuffling seed"},
      {"bi.pairing", T::choice, "cross", {"cross", "same"}, "reconstruction target pairing"},
      {"bi.contrastive_on", T::choice, "sr", {"sr", "latent"}, "contrastive input"},

      {"retrieval.k_extract", T::count, "10", {}, "images used for dimension extraction"},
      {"retrieval.threshold", T::real, "80", {}, "percent of magnitude covered by D"},
      {"retrieval.k_return", T::count, "10", {}, "ranked list length"},
      {"retrieval.method", T::choice, "sr", {"sr", "avg_emb"}, "exclusion method"},

      {"encode.modality", T::choice, "image", {"image", "text"}, "branch used by encode-corpus"},
      {"query.labels", T::text, "", {}, "comma-separated labels for the query subcommand"},

      {"eval.min_co", T::count, "10", {}, "minimum images carrying both labels"},
      {"eval.min_excl", T::count, "10", {}, "minimum images carrying A but not B"},
      {"eval.metrics", T::text, "MRR@1,MRR@10,NDCG@10,AP@10", {}, "reported metrics"},
      {"eval.alpha", T::real, "0.01", {}, "significance level for compare"},

      {"synth.labels", T::count, "8", {}, "label count L"},
      {"synth.images_per_label", T::count, "50", {}, "images generated per label"},
      {"synth.dense_dim", T::count, "16", {}, "dense dimensionality k"},
      {"synth.factors", T::count, "4", {}, "dimension of the label subspace"},
      {"synth.noise", T::real, "0.05", {}, "Gaussian noise sigma"},
      {"synth.cooccurrence", T::real, "0.3", {}, "chance of a second label"},
      {"synth.partner_bias", T::real, "0.75", {}, "chance the second label is the partner"},
      {"synth.text_alignment", T::real, "1.0", {}, "image/text direction cosine"},
      {"synth.captions_per_image", T::count, "1", {}, "captions per image"},
      {"synth.word_dim", T::count, "50", {}, "word vector dimensionality m"},
      {"synth.filler_words", T::count, "300", {}, "extra vocabulary tokens"},
      {"synth.seed", T::count, "0", {}, "generator seed"},

      path_key("io.words", "word vectors (text)"),
      path_key("io.word_sparse", "sparse word embeddings (SEMB)"),
      path_key("io.sae_checkpoint", "word autoencoder checkpoint (SAE1)"),
      path_key("io.captions", "captions (JSON lines)"),
      path_key("io.caption_emb", "caption embeddings (SEMB)"),
      path_key("io.images", "image embeddings (DEMB)"),
      path_key("io.texts", "caption dense embeddings (DEMB)"),
      path_key("io.dense", "dense input for encode-corpus (DEMB)"),
      path_key("io.bi_checkpoint", "bi-encoder checkpoint (BIE1)"),
      path_key("io.sparse", "sparse corpus (SEMB)"),
      path_key("io.index", "inverted index (SIDX)"),
      path_key("io.label_dense", "label embeddings (DEMB)"),
      path_key("io.labels", "image labels (JSON lines)"),
      path_key("io.queries", "exclusion queries (JSON lines)"),
      path_key("io.run", "ranked run (TSV)"),
      path_key("io.run_b", "second ranked run for compare (TSV)"),
      path_key("io.report", "text report"),
      path_key("io.report_json", "JSON report"),
      path_key("io.trace", "per-epoch loss trace (TSV)"),
      path_key("io.manifest", "manifest path (default: first output + .manifest.jsonl)"),
      path_key("io.out_dir", "output directory for synth"),
  };
}

const KeySpec& spec_for(std::string_view key) {
  for (const auto& s : config_schema()) {
    if (s.key == key) return s;
  }
  throw UsageError("unknown key '" + std::string(key) + "'");
}

template <class Int>
bool parse_int(std::string_view s, Int& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

const std::vector<KeySpec>& config_schema() {
  static const std::vector<KeySpec> schema = build_schema();
  return schema;
}

RunConfig::RunConfig() {
  for (const auto& s : config_schema()) values_[s.key] = s.fallback;
}

void RunConfig::set(std::string_view key, std::string_view value, std::string_view origin) {
  const KeySpec& spec = spec_for(key);
  const auto fail = [&](const std::string& what) {
    return UsageError(std::string(origin) + ": " + std::string(key) + ": " + what + ", got '" +
                      std::string(value) + "'");
  };
  switch (spec.type) {
    case ValueType::integer: {
      std::int64_t v;
      if (!parse_int(value, v)) throw fail("expected integer");
      break;
    }
    case ValueType::count: {
      std::uint64_t v;
      if (!parse_int(value, v)) throw fail("expected non-negative integer");
      break;
    }
    case ValueType::real: {
      double v;
      if (!detail::parse_real(value, v)) throw fail("expected number");
      break;
    }
    case ValueType::boolean:
      if (value != "true" && value != "false") throw fail("expected true or false");
      break;
    case ValueType::choice:
      if (std::find(spec.choices.begin(), spec.choices.end(), value) == spec.choices.end()) {
        std::string list;
        for (const auto& c : spec.choices) list += (list.empty() ? "" : "|") + c;
        throw fail("expected one of " + list);
      }
      break;
    case ValueType::text:
      break;
  }
  values_[std::string(key)] = std::string(value);
}

const std::string& RunConfig::raw(std::string_view key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("unknown key '" + std::string(key) + "'");
  return it->second;
}

std::int64_t RunConfig::integer(std::string_view key) const {
  std::int64_t v = 0;
  if (!parse_int(std::string_view(raw(key)), v)) {
    throw UsageError(std::string(key) + ": expected integer");
  }
  return v;
}

std::size_t RunConfig::count(std::string_view key) const {
  std::uint64_t v = 0;
  if (!parse_int(std::string_view(raw(key)), v)) {
    throw UsageError(std::string(key) + ": expected non-negative integer");
  }
  return static_cast<std::size_t>(v);
}

double RunConfig::real(std::string_view key) const {
  double v = 0.0;
  if (!detail::parse_real(raw(key), v)) throw UsageError(std::string(key) + ": expected number");
  return v;
}

bool RunConfig::boolean(std::string_view key) const { return raw(key) == "true"; }

std::string RunConfig::dump(std::string_view prefix) const {
  std::string out;
  for (const auto& [k, v] : values_) {
    if (k.compare(0, prefix.size(), prefix) == 0) out += k + "=" + v + "\n";
  }
  return out;
}

RunConfig parse_config(const std::optional<std::filesystem::path>& file,
                       std::span<const std::string> flags) {
  RunConfig rc;
  if (file) {
    const std::string content = read_file(*file);
    detail::for_each_line(content, [&](std::size_t line_no, std::string_view line) {
      const std::string t = trim(line);
      if (t.empty() || t.front() == '#') return;
      const auto eq = t.find('=');
      const std::string origin = file->string() + ":" + std::to_string(line_no);
      if (eq == std::string::npos) throw UsageError(origin + ": expected key=value");
      rc.set(trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)),
             origin);
    });
  }
  for (const auto& flag : flags) {
    const auto eq = flag.find('=');
    if (flag.rfind("--", 0) != 0 || eq == std::string::npos || eq == 2) {
      throw UsageError("malformed flag '" + flag + "', expected --section.key=value");
    }
    rc.set(std::string_view(flag).substr(2, eq - 2), std::string_view(flag).substr(eq + 1),
           "flag");
  }
  return rc;
}

SaeTrainConfig sae_config(const RunConfig& rc) {
  SaeTrainConfig c;
  c.latent_dim = rc.count("sae.latent_dim");
  c.target_sparsity = rc.real("sae.target_sparsity");
  c.learning_rate = rc.real("sae.learning_rate");
  c.epochs = static_cast<int>(rc.integer("sae.epochs"));
  c.batch_size = rc.count("sae.batch_size");
  c.seed = rc.count("sae.seed");
  c.validate();
  return c;
}

BiTrainConfig bi_config(const RunConfig& rc) {
  BiTrainConfig c;
  c.latent_dim = rc.count("bi.latent_dim");
  c.top_t = rc.count("bi.top_t");
  c.active_threshold = rc.real("bi.active_threshold");
  c.lambda = rc.real("bi.lambda");
  c.temperature = rc.real("bi.temperature");
  c.learning_rate = rc.real("bi.learning_rate");
  c.epochs = static_cast<int>(rc.integer("bi.epochs"));
  c.batch_size = rc.count("bi.batch_size");
  c.seed = rc.count("bi.seed");
  c.pairing = rc.text("bi.pairing") == "same" ? ReconPairing::same : ReconPairing::cross;
  c.contrastive_on =
      rc.text("bi.contrastive_on") == "latent" ? ContrastiveOn::latent : ContrastiveOn::sr;
  c.validate();
  return c;
}

ExclusionParams exclusion_params(const RunConfig& rc) {
  ExclusionParams p;
  p.k_extract = rc.count("retrieval.k_extract");
  p.threshold = rc.real("retrieval.threshold");
  p.k_return = rc.count("retrieval.k_return");
  p.validate();
  return p;
}

SynthConfig synth_config(const RunConfig& rc) {
  SynthConfig c;
  c.labels = rc.count("synth.labels");
  c.images_per_label = rc.count("synth.images_per_label");
  c.dense_dim = rc.count("synth.dense_dim");
  c.factors = rc.count("synth.factors");
  c.noise = rc.real("synth.noise");
  c.cooccurrence = rc.real("synth.cooccurrence");
  c.partner_bias = rc.real("synth.partner_bias");
  c.text_alignment = rc.real("synth.text_alignment");
  c.captions_per_image = rc.count("synth.captions_per_image");
  c.word_dim = rc.count("synth.word_dim");
  c.filler_words = rc.count("synth.filler_words");
  c.seed = rc.count("synth.seed");
  c.validate();
  return c;
}

std::vector<MetricSpec> metric_specs(std::string_view list) {
  std::vector<MetricSpec> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const auto comma = list.find(',', pos);
    const std::string item = trim(list.substr(pos, comma == list.npos ? list.npos : comma - pos));
    pos = comma == list.npos ? list.size() + 1 : comma + 1;
    if (item.empty()) continue;
    const auto at = item.find('@');
    std::size_t k = 0;
    if (at == std::string::npos || !parse_int(std::string_view(item).substr(at + 1), k) || k == 0) {
      throw UsageError("eval.metrics: bad metric '" + item + "'");
    }
    std::string base = item.substr(0, at);
    std::transform(base.begin(), base.end(), base.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    if (base == "MRR") {
      out.push_back({MetricKind::mrr, k});
    } else if (base == "NDCG") {
      out.push_back({MetricKind::ndcg, k});
    } else if (base == "AP") {
      out.push_back({MetricKind::ap, k});
    } else {
      throw UsageError("eval.metrics: bad metric '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError("eval.metrics: no metrics listed");
  return out;
}

}  // namespace spdr::cli
