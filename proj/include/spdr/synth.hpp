// Copyright (C) 2026 The spdr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Desk-scale stand-in for an image/caption corpus with object labels.
//
// Every label owns a unit direction in k-space, drawn inside a random
// `factors`-dimensional subspace (so labels are correlated when factors < L).
// An image vector is the sum of its labels' directions plus N(0, noise^2)
// per coordinate. Captions are the space-joined label names; the caption's
// dense vector and the label embeddings use text-side directions, which
// equal the image-side ones when text_alignment = 1.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include "spdr/embedding_set.hpp"
#include "spdr/error.hpp"
#include "spdr/rng.hpp"

namespace spdr {

struct SynthConfig {
  std::size_t labels = 8;
  std::size_t images_per_label = 50;
  std::size_t dense_dim = 16;    // k
  std::size_t factors = 4;       // dimension of the label subspace
  double noise = 0.05;           // sigma
  double cooccurrence = 0.3;     // chance an image carries a second label
  double partner_bias = 0.75;    // chance that second label is the partner label
  double text_alignment = 1.0;   // cosine between image- and text-side directions
  std::size_t captions_per_image = 1;
  std::size_t word_dim = 50;     // m
  std::size_t filler_words = 300;
  std::uint64_t seed = 0;

  void validate() const {
    if (labels < 2) throw UsageError("synth.labels must be at least 2");
    if (images_per_label < 1) throw UsageError("synth.images_per_label must be at least 1");
    if (dense_dim < 1) throw UsageError("synth.dense_dim must be at least 1");
    if (factors < 1) throw UsageError("synth.factors must be at least 1");
    if (factors > dense_dim) throw UsageError("synth.factors must not exceed synth.dense_dim");
    if (!(noise >= 0.0) || !std::isfinite(noise)) throw UsageError("synth.noise must be >= 0");
    if (!(cooccurrence >= 0.0 && cooccurrence <= 1.0)) {
      throw UsageError("synth.cooccurrence must lie in [0,1]");
    }
    if (!(partner_bias >= 0.0 && partner_bias <= 1.0)) {
      throw UsageError("synth.partner_bias must lie in [0,1]");
    }
    if (!(text_alignment > 0.0 && text_alignment <= 1.0)) {
      throw UsageError("synth.text_alignment must lie in (0,1]");
    }
    if (text_alignment < 1.0 && dense_dim < 2) {
      throw UsageError("synth.text_alignment < 1 needs dense_dim >= 2");
    }
    if (captions_per_image < 1) throw UsageError("synth.captions_per_image must be at least 1");
    if (word_dim < 1) throw UsageError("synth.word_dim must be at least 1");
  }
};

struct SynthCorpus {
  std::vector<std::string> label_names;
  DenseEmbeddingSet images;       // id "imgNNNNN"
  DenseEmbeddingSet texts;        // id "imgNNNNN#c"
  std::vector<CaptionRecord> captions;
  std::vector<LabeledImage> labels;
  DenseEmbeddingSet label_dense;  // id = label name, text side
  WordEmbeddingTable words;       // label names plus filler tokens
};

namespace detail {

inline std::string synth_label_name(std::size_t i) {
  static constexpr std::array<const char*, 24> kNames = {
      "person", "bicycle", "car",    "dog",      "cat",   "horse", "sheep",  "cow",
      "bird",   "boat",    "bus",    "train",    "truck", "bench", "chair",  "couch",
      "bed",    "table",   "laptop", "umbrella", "kite",  "pizza", "banana", "clock"};
  if (i < kNames.size()) return kNames[i];
  return "label" + std::to_string(i);
}

inline std::vector<double> unit_gaussian(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& x : v) {
      x = rng.normal();
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

// Orthonormal columns spanning a random `cols`-dimensional subspace of R^rows.
inline std::vector<std::vector<double>> random_orthonormal(Rng& rng, std::size_t rows,
                                                           std::size_t cols) {
  std::vector<std::vector<double>> basis;
  while (basis.size() < cols) {
    auto v = unit_gaussian(rng, rows);
    for (const auto& b : basis) {
      double d = 0.0;
      for (std::size_t i = 0; i < rows; ++i) d += v[i] * b[i];
      for (std::size_t i = 0; i < rows; ++i) v[i] -= d * b[i];
    }
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n < 1e-6) continue;
    for (double& x : v) x /= n;
    basis.push_back(std::move(v));
  }
  return basis;
}

}  // namespace detail

inline SynthCorpus synth_corpus(const SynthConfig& config) {
  config.validate();
  const std::size_t L = config.labels;
  const std::size_t k = config.dense_dim;
  const std::size_t f = config.factors;

  Rng geometry(config.seed, 20);
  const auto basis = detail::random_orthonormal(geometry, k, f);
  std::vector<std::vector<double>> coords(L);      // label coordinates in the subspace
  std::vector<std::vector<double>> image_dir(L, std::vector<double>(k, 0.0));
  for (std::size_t l = 0; l < L; ++l) {
    bool distinct = false;
    while (!distinct) {
      coords[l] = detail::unit_gaussian(geometry, f);
      distinct = true;
      for (std::size_t j = 0; j < l; ++j) {
        double c = 0.0;
        for (std::size_t i = 0; i < f; ++i) c += coords[l][i] * coords[j][i];
        if (c > 0.999) distinct = false;
      }
    }
    for (std::size_t a = 0; a < f; ++a) {
      for (std::size_t i = 0; i < k; ++i) image_dir[l][i] += coords[l][a] * basis[a][i];
    }
  }

  std::vector<std::vector<double>> text_dir = image_dir;
  if (config.text_alignment < 1.0) {
    const double a = config.text_alignment;
    const double b = std::sqrt(1.0 - a * a);
    for (std::size_t l = 0; l < L; ++l) {
      std::vector<double> u;
      double n = 0.0;
      do {
        u = detail::unit_gaussian(geometry, k);
        double d = 0.0;
        for (std::size_t i = 0; i < k; ++i) d += u[i] * image_dir[l][i];
        for (std::size_t i = 0; i < k; ++i) u[i] -= d * image_dir[l][i];
        n = 0.0;
        for (double x : u) n += x * x;
        n = std::sqrt(n);
      } while (n < 1e-6);
      for (std::size_t i = 0; i < k; ++i) text_dir[l][i] = a * image_dir[l][i] + b * u[i] / n;
    }
  }

  SynthCorpus out;
  for (std::size_t l = 0; l < L; ++l) out.label_names.push_back(detail::synth_label_name(l));
  out.images = DenseEmbeddingSet(static_cast<std::uint32_t>(k));
  out.texts = DenseEmbeddingSet(static_cast<std::uint32_t>(k));
  out.label_dense = DenseEmbeddingSet(static_cast<std::uint32_t>(k));

  // Labels pair up as partners (0,1), (2,3), ...; an odd last label pairs with 0.
  auto partner = [&](std::size_t l) -> std::size_t {
    const std::size_t p = l ^ 1u;
    return p < L ? p : 0;
  };

  Rng sampling(config.seed, 21);
  std::vector<double> vec(k);
  std::size_t serial = 0;
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t n = 0; n < config.images_per_label; ++n) {
      std::set<std::size_t> members{l};
      if (sampling.uniform() < config.cooccurrence) {
        std::size_t other = partner(l);
        if (sampling.uniform() >= config.partner_bias) {
          other = static_cast<std::size_t>(sampling.below(L - 1));
          if (other >= l) ++other;
        }
        members.insert(other);
      }
      char buf[32];
      std::snprintf(buf, sizeof buf, "img%05zu", serial++);
      const std::string id = buf;

      LabeledImage labeled{id, {}};
      std::string caption;
      for (std::size_t m : members) {
        labeled.labels.insert(out.label_names[m]);
        if (!caption.empty()) caption += ' ';
        caption += out.label_names[m];
      }

      for (std::size_t i = 0; i < k; ++i) {
        double s = 0.0;
        for (std::size_t m : members) s += image_dir[m][i];
        vec[i] = s + config.noise * sampling.normal();
      }
      out.images.add<double>(id, vec);
      for (std::size_t c = 0; c < config.captions_per_image; ++c) {
        for (std::size_t i = 0; i < k; ++i) {
          double s = 0.0;
          for (std::size_t m : members) s += text_dir[m][i];
          vec[i] = s + config.noise * sampling.normal();
        }
        out.texts.add<double>(caption_key(id, c), vec);
        out.captions.push_back({id, caption});
      }
      out.labels.push_back(std::move(labeled));
    }
  }

  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t i = 0; i < k; ++i) vec[i] = text_dir[l][i] + config.noise * sampling.normal();
    out.label_dense.add<double>(out.label_names[l], vec);
  }

  // Word vectors: label words are a fixed random linear image of the label
  // coordinates; filler tokens are isotropic Gaussian.
  Rng words(config.seed, 22);
  const std::size_t m = config.word_dim;
  std::vector<std::vector<double>> projection(m, std::vector<double>(f));
  for (auto& row : projection) {
    for (double& x : row) x = words.normal();
  }
  out.words = WordEmbeddingTable(static_cast<std::uint32_t>(m));
  std::vector<double> wv(m);
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t r = 0; r < m; ++r) {
      double s = 0.0;
      for (std::size_t a = 0; a < f; ++a) s += projection[r][a] * coords[l][a];
      wv[r] = s + config.noise * words.normal();
    }
    out.words.add<double>(out.label_names[l], wv);
  }
  for (std::size_t n = 0; n < config.filler_words; ++n) {
    for (double& x : wv) x = words.normal();
    char buf[32];
    std::snprintf(buf, sizeof buf, "w%05zu", n);
    out.words.add<double>(buf, wv);
  }
  return out;
}

}  // namespace spdr
