// Copyright (C) 2026 The spdr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "spdr/embedding_set.hpp"
#include "spdr/sparse_vector.hpp"

namespace spdr {

namespace detail {

// Decodes one UTF-8 code point at text[pos]; invalid bytes decode as
// themselves with length 1.
inline std::pair<char32_t, std::size_t> decode_utf8(std::string_view text, std::size_t pos) {
  const auto b0 = static_cast<unsigned char>(text[pos]);
  auto cont = [&](std::size_t k) -> int {
    if (pos + k >= text.size()) return -1;
    const auto b = static_cast<unsigned char>(text[pos + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) return {b0, 1};
  if ((b0 & 0xE0) == 0xC0) {
    const int c1 = cont(1);
    if (c1 >= 0) return {char32_t(((b0 & 0x1F) << 6) | c1), 2};
  } else if ((b0 & 0xF0) == 0xE0) {
    const int c1 = cont(1), c2 = cont(2);
    if (c1 >= 0 && c2 >= 0) return {char32_t(((b0 & 0x0F) << 12) | (c1 << 6) | c2), 3};
  } else if ((b0 & 0xF8) == 0xF0) {
    const int c1 = cont(1), c2 = cont(2), c3 = cont(3);
    if (c1 >= 0 && c2 >= 0 && c3 >= 0) {
      return {char32_t(((b0 & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3), 4};
    }
  }
  return {b0, 1};
}

// Unicode White_Space property.
inline bool is_unicode_space(char32_t c) {
  return (c >= 0x09 && c <= 0x0D) || c == 0x20 || c == 0x85 || c == 0xA0 || c == 0x1680 ||
         (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F ||
         c == 0x205F || c == 0x3000;
}

inline bool is_ascii_punct(char c) {
  return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
         (c >= 0x7B && c <= 0x7E);
}

inline char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? char(c - 'A' + 'a') : c; }

}  // namespace detail

inline std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = detail::ascii_lower(c);
  return out;
}

/// Lowercases, splits on Unicode whitespace and strips leading/trailing
/// ASCII punctuation from each piece. Inner punctuation is kept.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    std::size_t b = 0, e = current.size();
    while (b < e && detail::is_ascii_punct(current[b])) ++b;
    while (e > b && detail::is_ascii_punct(current[e - 1])) --e;
    if (e > b) tokens.push_back(to_lower_ascii(std::string_view(current).substr(b, e - b)));
    current.clear();
  };
  for (std::size_t pos = 0; pos < text.size();) {
    auto [cp, len] = detail::decode_utf8(text, pos);
    if (detail::is_unicode_space(cp)) {
      flush();
    } else {
      current.append(text.substr(pos, len));
    }
    pos += len;
  }
  flush();
  return tokens;
}

struct CaptionEmbedding {
  std::string image_id;
  std::size_t caption_index = 0;
  SparseVector embedding;
  std::size_t oov_count = 0;
  bool all_oov = false;  // no token was found; embedding is empty
};

/// Mean of the sparse word embeddings of in-vocabulary tokens. Out-of-
/// vocabulary tokens are skipped and counted. Per-dimension contributions are
/// summed in sorted order, so the result does not depend on token order.
inline CaptionEmbedding caption_embedding(std::span<const std::string> tokens,
                                          const SparseEmbeddingSet& words) {
  CaptionEmbedding out{{}, 0, SparseVector(words.dim()), 0, false};
  std::vector<SparseEntry> contributions;
  std::size_t found = 0;
  for (const auto& token : tokens) {
    const SparseVector* z = words.lookup(token);
    if (!z) {
      ++out.oov_count;
      continue;
    }
    ++found;
    contributions.insert(contributions.end(), z->entries().begin(), z->entries().end());
  }
  if (found == 0) {
    out.all_oov = true;
    return out;
  }
  std::sort(contributions.begin(), contributions.end(),
            [](const SparseEntry& a, const SparseEntry& b) {
              return a.index != b.index ? a.index < b.index : a.value < b.value;
            });
  std::vector<SparseEntry> entries;
  for (std::size_t i = 0; i < contributions.size();) {
    const std::uint32_t index = contributions[i].index;
    double sum = 0.0;
    for (; i < contributions.size() && contributions[i].index == index; ++i) {
      sum += contributions[i].value;
    }
    const float mean = static_cast<float>(sum / double(found));
    if (mean > 0.0f) entries.push_back({index, mean});
  }
  out.embedding = SparseVector(words.dim(), std::move(entries));
  return out;
}

inline CaptionEmbedding caption_embedding(std::string_view text,
                                          const SparseEmbeddingSet& words) {
  const auto tokens = tokenize(text);
  return caption_embedding(std::span<const std::string>(tokens), words);
}

/// One embedding per caption, in input order. caption_index counts the
/// captions of each image in the order they appear.
inline std::vector<CaptionEmbedding> embed_captions(std::span<const CaptionRecord> captions,
                                                    const SparseEmbeddingSet& words) {
  std::vector<CaptionEmbedding> out;
  out.reserve(captions.size());
  std::unordered_map<std::string, std::size_t> next_index;
  for (const auto& rec : captions) {
    auto emb = caption_embedding(std::string_view(rec.caption), words);
    emb.image_id = rec.image_id;
    emb.caption_index = next_index[rec.image_id]++;
    out.push_back(std::move(emb));
  }
  return out;
}

/// Caption embeddings keyed "imageid#captionindex".
inline SparseEmbeddingSet caption_embedding_set(std::span<const CaptionEmbedding> embeddings,
                                                std::uint32_t dim) {
  SparseEmbeddingSet out(dim);
  out.reserve(embeddings.size());
  for (const auto& e : embeddings) {
    out.add(caption_key(e.image_id, e.caption_index), e.embedding);
  }
  return out;
}

/// Per-image mean of caption embeddings keyed "imageid#k"; used to mask
/// images that own several captions with a single z_c.
inline SparseEmbeddingSet pool_captions_by_image(const SparseEmbeddingSet& caption_set) {
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<const SparseVector*>> groups;
  for (std::size_t i = 0; i < caption_set.size(); ++i) {
    const std::string& key = caption_set.id(i);
    const auto hash = key.rfind('#');
    const std::string image = hash == std::string::npos ? key : key.substr(0, hash);
    auto [it, inserted] = groups.try_emplace(image);
    if (inserted) order.push_back(image);
    it->second.push_back(&caption_set.vector(i));
  }
  SparseEmbeddingSet out(caption_set.dim());
  for (const auto& image : order) {
    const auto& group = groups[image];
    std::vector<SparseEntry> all;
    for (const auto* v : group) all.insert(all.end(), v->entries().begin(), v->entries().end());
    std::sort(all.begin(), all.end(), [](const SparseEntry& a, const SparseEntry& b) {
      return a.index != b.index ? a.index < b.index : a.value < b.value;
    });
    std::vector<SparseEntry> entries;
    for (std::size_t i = 0; i < all.size();) {
      const std::uint32_t index = all[i].index;
      double sum = 0.0;
      for (; i < all.size() && all[i].index == index; ++i) sum += all[i].value;
      const float mean = static_cast<float>(sum / double(group.size()));
      if (mean > 0.0f) entries.push_back({index, mean});
    }
    out.add(image, SparseVector(caption_set.dim(), std::move(entries)));
  }
  return out;
}

}  // namespace spdr
