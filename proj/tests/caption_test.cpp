// Copyright (C) 2026 The spdr Authors
// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "spdr/caption.hpp"
#include "support.hpp"

namespace spdr {
namespace {

using Tokens = std::vector<std::string>;

SparseEmbeddingSet basis_words() {
  SparseEmbeddingSet words(4);
  words.add("a", SparseVector(4, {{0, 1.0f}}));
  words.add("b", SparseVector(4, {{1, 1.0f}}));
  words.add("c", SparseVector(4, {{1, 0.5f}, {3, 0.25f}}));
  return words;
}

TEST(Tokenize, Examples) {
  EXPECT_EQ(tokenize("A dog, running!"), (Tokens{"a", "dog", "running"}));
  EXPECT_EQ(tokenize(""), Tokens{});
  EXPECT_EQ(tokenize("state-of-the-art"), Tokens{"state-of-the-art"});
}

TEST(Tokenize, WhitespaceAndPunctuation) {
  EXPECT_EQ(tokenize("  \"Hello\"\t(World)\n... --"), (Tokens{"hello", "world"}));
  EXPECT_EQ(tokenize("it's a man's hat."), (Tokens{"it's", "a", "man's", "hat"}));
  // U+00A0 and U+3000 are Unicode spaces.
  EXPECT_EQ(tokenize("red\xc2\xa0" "car\xe3\x80\x80" "Bus"), (Tokens{"red", "car", "bus"}));
  // Non-ASCII letters are kept as they are.
  EXPECT_EQ(tokenize("Caf\xc3\xa9!"), Tokens{"caf\xc3\xa9"});
}

TEST(CaptionEmbedding, MeanOfBasisVectors) {
  const auto words = basis_words();
  const auto e = caption_embedding(std::span<const std::string>(Tokens{"a", "b"}), words);
  ASSERT_EQ(e.embedding.nnz(), 2u);
  EXPECT_EQ(e.embedding.entries()[0], (SparseEntry{0, 0.5f}));
  EXPECT_EQ(e.embedding.entries()[1], (SparseEntry{1, 0.5f}));
  EXPECT_EQ(e.oov_count, 0u);
  EXPECT_FALSE(e.all_oov);
}

TEST(CaptionEmbedding, SingleTokenIsIdentity) {
  const auto words = basis_words();
  const auto e = caption_embedding(std::string_view("C"), words);
  EXPECT_TRUE(std::ranges::equal(e.embedding.entries(), words.lookup("c")->entries()));
}

TEST(CaptionEmbedding, SkipsUnknownTokens) {
  const auto words = basis_words();
  const auto e = caption_embedding(std::span<const std::string>(Tokens{"a", "zzz-unknown"}), words);
  ASSERT_EQ(e.embedding.nnz(), 1u);
  EXPECT_EQ(e.embedding.entries()[0], (SparseEntry{0, 1.0f}));
  EXPECT_EQ(e.oov_count, 1u);
}

TEST(CaptionEmbedding, AllUnknownIsFlagged) {
  const auto words = basis_words();
  const auto e = caption_embedding(std::string_view("x y"), words);
  EXPECT_TRUE(e.all_oov);
  EXPECT_TRUE(e.embedding.empty());
  EXPECT_EQ(e.embedding.dim(), 4u);
  EXPECT_EQ(e.oov_count, 2u);
}

TEST(EmbedCaptions, IndicesPerImage) {
  const auto words = basis_words();
  const std::vector<CaptionRecord> caps{{"i1", "a"}, {"i1", "b"}, {"i2", "a b"}};
  const auto out = embed_captions(caps, words);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].image_id, "i1");
  EXPECT_EQ(out[0].caption_index, 0u);
  EXPECT_EQ(out[1].image_id, "i1");
  EXPECT_EQ(out[1].caption_index, 1u);
  EXPECT_EQ(out[2].image_id, "i2");
  EXPECT_EQ(out[2].caption_index, 0u);
  EXPECT_TRUE(embed_captions({}, words).empty());

  const auto set = caption_embedding_set(out, 4);
  EXPECT_EQ(set.id(1), "i1#1");
  EXPECT_TRUE(set.lookup("i2#0"));
}

TEST(EmbedCaptions, SharedTokenGivesEqualEmbeddings) {
  const auto words = basis_words();
  const std::vector<CaptionRecord> caps{{"i1", "C!"}, {"i2", "c"}, {"i3", "(c) xyz"}};
  const auto out = embed_captions(caps, words);
  for (const auto& e : out) {
    EXPECT_TRUE(std::ranges::equal(e.embedding.entries(), out[0].embedding.entries()));
  }
}

TEST(PoolCaptions, AveragesPerImage) {
  SparseEmbeddingSet caps(3);
  caps.add("i1#0", SparseVector(3, {{0, 1.0f}}));
  caps.add("i1#1", SparseVector(3, {{1, 0.5f}}));
  caps.add("i2#0", SparseVector(3, {{2, 0.25f}}));
  const auto pooled = pool_captions_by_image(caps);
  ASSERT_EQ(pooled.size(), 2u);
  EXPECT_EQ(pooled.id(0), "i1");
  EXPECT_EQ(pooled.vector(0).value_at(0), 0.5f);
  EXPECT_EQ(pooled.vector(0).value_at(1), 0.25f);
  EXPECT_EQ(pooled.vector(1).value_at(2), 0.25f);
}

// ---------------------------------------------------------------------------
// Properties.

struct RandomVocab {
  SparseEmbeddingSet words{1};
  std::vector<std::string> tokens;
};

RandomVocab random_vocab(Rng& rng) {
  const auto dim = static_cast<std::uint32_t>(2 + rng.below(30));
  RandomVocab v{SparseEmbeddingSet(dim), {}};
  const std::size_t n = 1 + rng.below(10);
  for (std::size_t i = 0; i < n; ++i) {
    v.tokens.push_back("t" + std::to_string(i));
    v.words.add(v.tokens.back(), test::random_sparse(rng, dim, rng.uniform(0.05, 0.6)));
  }
  v.tokens.push_back("oov");
  return v;
}

TEST(CaptionProperties, PoolingBoundsAndOrderInvariance) {
  Rng rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto vocab = random_vocab(rng);
    Tokens tokens;
    for (std::size_t i = 1 + rng.below(8); i > 0; --i) {
      tokens.push_back(vocab.tokens[rng.below(vocab.tokens.size())]);
    }
    const auto e = caption_embedding(std::span<const std::string>(tokens), vocab.words);

    float max_word = 0.0f;
    std::size_t sum_nnz = 0;
    std::size_t max_nnz = 0;
    std::size_t found = 0;
    for (const auto& t : tokens) {
      if (const auto* z = vocab.words.lookup(t)) {
        ++found;
        sum_nnz += z->nnz();
        max_nnz = std::max(max_nnz, z->nnz());
        for (const auto& en : z->entries()) max_word = std::max(max_word, en.value);
      }
    }
    ASSERT_EQ(e.oov_count, tokens.size() - found);
    ASSERT_EQ(e.all_oov, found == 0);
    for (const auto& en : e.embedding.entries()) {
      ASSERT_GT(en.value, 0.0f);
      ASSERT_LE(en.value, 1.0f);
      ASSERT_LE(en.value, max_word);
    }
    ASSERT_LE(e.embedding.nnz(), sum_nnz);
    // Contributions are positive, so pooling never drops a dimension
    // (unless a mean underflows float, which these magnitudes cannot).
    ASSERT_GE(e.embedding.nnz(), max_nnz);

    Tokens shuffled = tokens;
    rng.shuffle(std::span<std::string>(shuffled));
    const auto f = caption_embedding(std::span<const std::string>(shuffled), vocab.words);
    ASSERT_TRUE(std::ranges::equal(e.embedding.entries(), f.embedding.entries()));
  }
}

TEST(CaptionProperties, TokenizerOutputIsNormalized) {
  Rng rng(32);
  static constexpr char kAlphabet[] = "aZ-'.,!? \t\n\"()x9";
  for (int trial = 0; trial < 1000; ++trial) {
    std::string text(rng.below(40), ' ');
    for (char& c : text) c = kAlphabet[rng.below(sizeof kAlphabet - 1)];
    const auto tokens = tokenize(text);
    ASSERT_EQ(tokenize(text), tokens);
    for (const auto& t : tokens) {
      ASSERT_FALSE(t.empty());
      for (char c : t) {
        ASSERT_FALSE(c >= 'A' && c <= 'Z');
        ASSERT_FALSE(c == ' ' || c == '\t' || c == '\n');
      }
      ASSERT_FALSE(std::ispunct(static_cast<unsigned char>(t.front())));
      ASSERT_FALSE(std::ispunct(static_cast<unsigned char>(t.back())));
    }
  }
}

}  // namespace
}  // namespace spdr
