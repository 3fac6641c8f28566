// Copyright (C) 2026 The spdr Authors
// SPDX-License-Identifier: Apache-2.0
#include <clocale>
#include <cmath>
#include <fstream>
#include <functional>
#include <locale>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "spdr/io.hpp"
#include "support.hpp"

namespace spdr {
namespace {

using test::TempDir;

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

DenseEmbeddingSet small_dense() {
  DenseEmbeddingSet set(4);
  set.add("a", {1.0f, 2.0f, 3.0f, 4.0f});
  set.add("b", {-0.5f, 0.0f, 0.25f, 1e-7f});
  set.add("c", {0.0f, 0.0f, 0.0f, 0.0f});
  return set;
}

// ---------------------------------------------------------------------------
// Word vectors.

TEST(WordVectors, ParsesTokensAndValues) {
  const auto t = parse_word_vectors("a 1.0 0.0\nb 0.0 1.0");
  ASSERT_EQ(t.dim(), 2u);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t.token(0), "a");
  EXPECT_EQ(t.row(0)[0], 1.0f);
  EXPECT_EQ(t.row(0)[1], 0.0f);
  EXPECT_EQ(t.token(1), "b");
  EXPECT_EQ(t.row(1)[1], 1.0f);
}

TEST(WordVectors, WrongFieldCountNamesLine) {
  EXPECT_EQ(error_of([] { parse_word_vectors("a 1.0\nb 2.0 3.0"); }),
            "line 2: expected 1 values, found 2");
}

TEST(WordVectors, EmptyFile) {
  EXPECT_EQ(error_of([] { parse_word_vectors(""); }), "empty file");
  EXPECT_EQ(error_of([] { parse_word_vectors("\n  \n"); }), "empty file");
}

TEST(WordVectors, DuplicatesKeepFirstAndAreCounted) {
  const auto t = parse_word_vectors("Dog 1 2\ncat 3 4\ndog 5 6\nCAT 7 8\n");
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t.duplicate_count(), 2u);
  EXPECT_EQ(t.row(*t.find("dog"))[0], 1.0f);
  EXPECT_EQ(t.row(*t.find("cat"))[0], 3.0f);
}

TEST(WordVectors, AcceptsCrlfAndTabs) {
  const auto t = parse_word_vectors("a\t1.5 -2\r\nb 3e-2\t4\r\n");
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t.row(0)[0], 1.5f);
  EXPECT_EQ(t.row(1)[0], 0.03f);
}

TEST(WordVectors, RejectsNonNumbers) {
  EXPECT_NE(error_of([] { parse_word_vectors("a 1,5 2"); }).find("line 1"), std::string::npos);
  EXPECT_NE(error_of([] { parse_word_vectors("a nan 2"); }).find("line 1"), std::string::npos);
  EXPECT_NE(error_of([] { parse_word_vectors("a 1 inf"); }).find("line 1"), std::string::npos);
  EXPECT_NE(error_of([] { parse_word_vectors("a 1 2\nb 1 2x"); }).find("line 2"),
            std::string::npos);
  EXPECT_FALSE(error_of([] { parse_word_vectors("a 1,000 2"); }).empty());
}

TEST(WordVectors, ParsingIgnoresGlobalLocale) {
  const std::string text = "x 0.5 1.25\n";
  const char* previous = std::setlocale(LC_ALL, nullptr);
  const std::string saved = previous ? previous : "C";
  bool switched = false;
  for (const char* name : {"de_DE.UTF-8", "de_DE.utf8", "fr_FR.UTF-8", "C.UTF-8"}) {
    if (std::setlocale(LC_ALL, name)) {
      switched = true;
      break;
    }
  }
  const auto t = parse_word_vectors(text);
  const auto run = [] {
    RunMap m = parse_run("q\t1\tx\t0.500000\n");
    return m.size();
  }();
  std::setlocale(LC_ALL, saved.c_str());
  EXPECT_EQ(t.row(0)[0], 0.5f);
  EXPECT_EQ(t.row(0)[1], 1.25f);
  EXPECT_EQ(run, 1u);
  if (!switched) GTEST_LOG_(INFO) << "no alternative C locale installed";
}

TEST(WordVectors, PublicSliceMatchesSourceCounts) {
  const auto path = test::data_dir() / "glove_2000x50.txt";
  std::ifstream in(path);
  ASSERT_TRUE(in) << path;
  std::string line;
  std::string slice;
  std::vector<std::string> tokens;
  std::vector<std::size_t> lengths;
  while (tokens.size() < 50 && std::getline(in, line)) {
    slice += line + "\n";
    std::istringstream fields(line);
    std::string token;
    fields >> token;
    tokens.push_back(token);
    std::size_t n = 0;
    std::string v;
    while (fields >> v) ++n;
    lengths.push_back(n);
  }
  const auto t = parse_word_vectors(slice);
  EXPECT_EQ(t.dim(), 50u);
  EXPECT_EQ(t.size(), 50u);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    EXPECT_EQ(lengths[i], 50u);
    EXPECT_TRUE(t.find(tokens[i]).has_value()) << tokens[i];
  }
  const auto full = read_word_vectors(path);
  EXPECT_EQ(full.size(), 2000u);
  EXPECT_EQ(full.dim(), 50u);
  EXPECT_EQ(full.duplicate_count(), 0u);
}

TEST(WordVectors, ReadErrorsNameThePath) {
  TempDir dir;
  const auto msg = error_of([&] { read_word_vectors(dir / "absent.txt"); });
  EXPECT_NE(msg.find("absent.txt"), std::string::npos);
}

// ---------------------------------------------------------------------------
// DEMB.

TEST(DenseFormat, RoundTripIsByteIdentical) {
  TempDir dir;
  const auto set = small_dense();
  write_dense_set(set, dir / "x.demb");
  const auto back = read_dense_set(dir / "x.demb");
  ASSERT_EQ(back.size(), 3u);
  ASSERT_EQ(back.dim(), 4u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.id(i), set.id(i));
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(back.row(i)[j], set.row(i)[j]);
  }
  EXPECT_EQ(encode_dense_set(back), read_file(dir / "x.demb"));
}

TEST(DenseFormat, LayoutIsLittleEndian) {
  DenseEmbeddingSet set(1);
  set.add("ab", {1.0f});
  const auto bytes = encode_dense_set(set);
  const std::string expected("DEMB\x01\x01\x00\x00\x00\x01\x00\x00\x00\x02\x00" "ab"
                             "\x00\x00\x80\x3f",
                             4 + 1 + 4 + 4 + 2 + 2 + 4);
  EXPECT_EQ(bytes, expected);
}

TEST(DenseFormat, BadMagic) {
  auto bytes = encode_dense_set(small_dense());
  bytes[0] = 'X';
  EXPECT_EQ(error_of([&] { decode_dense_set(bytes); }), "bad magic");
}

TEST(DenseFormat, HeaderCountBeyondRecordsIsTruncation) {
  DenseEmbeddingSet set(2);
  for (int i = 0; i < 4; ++i) set.add("r" + std::to_string(i), {1.0f, 2.0f});
  auto bytes = encode_dense_set(set);
  bytes[5] = 5;
  EXPECT_EQ(error_of([&] { decode_dense_set(bytes); }), "truncated at record 5");
}

TEST(DenseFormat, FewerRecordsInHeaderLeavesTrailingBytes) {
  auto bytes = encode_dense_set(small_dense());
  bytes[5] = 2;
  EXPECT_EQ(error_of([&] { decode_dense_set(bytes); }), "trailing bytes after record 2");
}

TEST(DenseFormat, FutureVersionAndDuplicateIds) {
  auto bytes = encode_dense_set(small_dense());
  bytes[4] = 2;
  EXPECT_EQ(error_of([&] { decode_dense_set(bytes); }), "unsupported version 2");

  auto dup = encode_dense_set(small_dense());
  dup[13 + 19 + 2] = 'a';  // id of record 2 becomes "a"
  const auto duplicate = error_of([&] { decode_dense_set(dup); });
  EXPECT_NE(duplicate.find("record 2"), std::string::npos) << duplicate;
  EXPECT_NE(duplicate.find("duplicate"), std::string::npos) << duplicate;
}

// ---------------------------------------------------------------------------
// SEMB.

std::string semb_with_entries(std::uint32_t dim,
                              const std::vector<std::pair<std::uint32_t, float>>& entries) {
  ByteWriter w;
  w.bytes("SEMB");
  w.u8(1);
  w.u32(1);
  w.u32(dim);
  w.u16(1);
  w.bytes("r");
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& [i, v] : entries) {
    w.u32(i);
    w.f32(v);
  }
  return std::move(w).str();
}

TEST(SparseFormat, RejectsBrokenEntries) {
  EXPECT_EQ(error_of([] { decode_sparse_set(semb_with_entries(5, {{2, 0.5f}, {1, 0.3f}})); }),
            "record 1: indices not strictly increasing");
  EXPECT_EQ(error_of([] { decode_sparse_set(semb_with_entries(5, {{2, 0.5f}, {2, 0.3f}})); }),
            "record 1: indices not strictly increasing");
  EXPECT_NE(error_of([] { decode_sparse_set(semb_with_entries(5, {{5, 0.5f}})); })
                .find("out of range"),
            std::string::npos);
  EXPECT_NE(error_of([] { decode_sparse_set(semb_with_entries(5, {{1, 0.0f}})); })
                .find("positive"),
            std::string::npos);
  EXPECT_NE(error_of([] { decode_sparse_set(semb_with_entries(5, {{1, -1.0f}})); })
                .find("positive"),
            std::string::npos);
  EXPECT_NE(error_of([] { decode_sparse_set(semb_with_entries(5, {{1, INFINITY}})); })
                .find("finite"),
            std::string::npos);
}

TEST(SparseFormat, EmptySetRoundTrips) {
  TempDir dir;
  write_sparse_set(SparseEmbeddingSet(1000), dir / "e.semb");
  const auto back = read_sparse_set(dir / "e.semb");
  EXPECT_EQ(back.size(), 0u);
  EXPECT_EQ(back.dim(), 1000u);
}

TEST(SparseFormat, RandomRecordsRoundTrip) {
  Rng rng(11);
  const auto set = test::random_sparse_set(rng, 100, 300, 0.05);
  const auto back = decode_sparse_set(encode_sparse_set(set));
  ASSERT_EQ(back.size(), 100u);
  for (std::size_t i = 0; i < 100; ++i) {
    EXPECT_EQ(back.id(i), set.id(i));
    EXPECT_TRUE(std::ranges::equal(back.vector(i).entries(), set.vector(i).entries()));
  }
}

// ---------------------------------------------------------------------------
// Structured text.

TEST(Captions, PreservesOrderAndSkipsBlankLines) {
  const auto caps = parse_captions(
      "{\"image_id\":\"i2\",\"caption\":\"A dog.\"}\n\n"
      "{\"image_id\":\"i1\",\"caption\":\"Two cats\"}\n");
  ASSERT_EQ(caps.size(), 2u);
  EXPECT_EQ(caps[0].image_id, "i2");
  EXPECT_EQ(caps[0].caption, "A dog.");
  EXPECT_EQ(caps[1].image_id, "i1");
}

TEST(Captions, MissingFieldNamesLine) {
  const std::string text =
      "{\"image_id\":\"a\",\"caption\":\"x\"}\n"
      "{\"image_id\":\"b\",\"caption\":\"y\"}\n"
      "{\"image_id\":\"c\"}\n";
  EXPECT_EQ(error_of([&] { parse_captions(text); }), "line 3: missing field caption");
  EXPECT_EQ(error_of([] { parse_captions("not json\n"); }), "line 1: malformed record");
  EXPECT_EQ(error_of([] { parse_captions("{\"image_id\":\"a\",\"caption\":\"\"}"); }),
            "line 1: field caption is empty");
}

TEST(Labels, ParsesLabelSets) {
  const auto labels = parse_labels("{\"image_id\":\"i1\",\"labels\":[\"dog\",\"cat\"]}\n"
                                   "{\"image_id\":\"i2\",\"labels\":[]}\n");
  ASSERT_EQ(labels.size(), 2u);
  EXPECT_EQ(labels[0].image_id, "i1");
  EXPECT_EQ(labels[0].labels, (std::set<std::string>{"cat", "dog"}));
  EXPECT_TRUE(labels[1].labels.empty());
  EXPECT_EQ(error_of([] { parse_labels("{\"image_id\":\"i1\"}"); }),
            "line 1: missing field labels");
}

TEST(Queries, ValidatesRecords) {
  const auto q = parse_queries("{\"include\":\"a\",\"exclude\":\"b\",\"relevant\":[\"i3\",\"i1\"]}\n");
  ASSERT_EQ(q.size(), 1u);
  EXPECT_EQ(q[0].relevant, (std::vector<std::string>{"i1", "i3"}));
  EXPECT_EQ(error_of([] { parse_queries("{\"include\":\"a\",\"exclude\":\"a\",\"relevant\":[\"x\"]}"); }),
            "line 1: include equals exclude");
  EXPECT_EQ(error_of([] { parse_queries("{\"include\":\"a\",\"exclude\":\"b\",\"relevant\":[]}"); }),
            "line 1: empty relevant set");
}

TEST(Runs, RoundTripAndValidation) {
  RankedList list;
  list.hits = {{"x", 2.5}, {"y", 1.0 / 3.0}};
  std::string text;
  append_run(text, "a|b", list);
  EXPECT_EQ(text, "a|b\t1\tx\t2.500000\na|b\t2\ty\t0.333333\n");
  const auto run = parse_run(text);
  EXPECT_EQ(run.at("a|b"), (std::vector<std::string>{"x", "y"}));
  EXPECT_NE(error_of([] { parse_run("q\t2\tx\t1.0\n"); }).find("out of order"), std::string::npos);
  EXPECT_NE(error_of([] { parse_run("q\t1\tx\t1.0\nq\t2\tx\t0.5\n"); }).find("repeated"),
            std::string::npos);
  EXPECT_NE(error_of([] { parse_run("q\t1\tx\n"); }).find("expected 4"), std::string::npos);
}

// ---------------------------------------------------------------------------
// Checkpoints and index.

TEST(Checkpoints, SaeRoundTripIsExact) {
  TempDir dir;
  const auto model = sae_init<float>(50, 200, 3);
  save_sae_checkpoint(model, "sae.epochs=30\n", dir / "m.sae");
  const auto ck = load_sae_checkpoint(dir / "m.sae");
  EXPECT_EQ(ck.model.encoder.weight, model.encoder.weight);
  EXPECT_EQ(ck.model.encoder.bias, model.encoder.bias);
  EXPECT_EQ(ck.model.decoder.weight, model.decoder.weight);
  EXPECT_EQ(ck.model.decoder.bias, model.decoder.bias);
  EXPECT_EQ(ck.config_text, "sae.epochs=30\n");
}

TEST(Checkpoints, BiencoderRoundTripIsExact) {
  TempDir dir;
  const auto model = bi_init<float>(16, 64, 5);
  save_bi_checkpoint(model, "bi.top_t=4\n", dir / "m.bie");
  const auto ck = load_bi_checkpoint(dir / "m.bie");
  EXPECT_TRUE(ck.model == model);
  EXPECT_EQ(ck.config_text, "bi.top_t=4\n");
}

TEST(Checkpoints, FutureVersionRejected) {
  auto sae = encode_sae_checkpoint(sae_init<float>(2, 3, 1), "");
  sae[4] = 9;
  EXPECT_EQ(error_of([&] { decode_sae_checkpoint(sae); }), "unsupported version 9");
  auto bi = encode_bi_checkpoint(bi_init<float>(2, 3, 1), "");
  bi[4] = 2;
  EXPECT_EQ(error_of([&] { decode_bi_checkpoint(bi); }), "unsupported version 2");
  EXPECT_EQ(error_of([&] { decode_sae_checkpoint(bi); }), "bad magic");
}

TEST(Checkpoints, ShapeInconsistencyRejected) {
  auto bytes = encode_sae_checkpoint(sae_init<float>(4, 6, 1), "cfg");
  bytes[9] = 7;  // d no longer matches the parameter block
  EXPECT_FALSE(error_of([&] { decode_sae_checkpoint(bytes); }).empty());
}

TEST(IndexFormat, RoundTripPreservesPostings) {
  Rng rng(4);
  const auto set = test::random_sparse_set(rng, 60, 40, 0.2);
  const auto index = build_index(set);
  const auto bytes = encode_index(index);
  const auto back = decode_index(bytes);
  ASSERT_EQ(back.size(), index.size());
  for (std::uint32_t d = 0; d < index.dim(); ++d) {
    const auto a = index.postings(d);
    const auto b = back.postings(d);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t j = 0; j < a.size(); ++j) {
      EXPECT_EQ(a[j].ordinal, b[j].ordinal);
      EXPECT_EQ(a[j].value, b[j].value);
    }
  }
  EXPECT_EQ(encode_index(back), bytes);
}

// ---------------------------------------------------------------------------
// Properties over generated inputs.

std::string random_id(Rng& rng) {
  static constexpr char kChars[] = "abcdefghijklmnopqrstuvwxyz0123456789_-#|";
  std::string id(1 + rng.below(8), 'a');
  for (char& c : id) c = kChars[rng.below(sizeof kChars - 1)];
  return id;
}

std::vector<std::string> unique_ids(Rng& rng, std::size_t n) {
  std::set<std::string> seen;
  std::vector<std::string> out;
  while (out.size() < n) {
    auto id = random_id(rng) + std::to_string(out.size());
    if (seen.insert(id).second) out.push_back(std::move(id));
  }
  return out;
}

float random_float(Rng& rng) {
  switch (rng.below(4)) {
    case 0: return 0.0f;
    case 1: return static_cast<float>(rng.normal() * 1e-30);
    case 2: return static_cast<float>(rng.normal() * 1e6);
    default: return static_cast<float>(rng.normal());
  }
}

TEST(IoProperties, WriteReadWriteIsByteIdentical) {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = rng.below(6);
    const auto ids = unique_ids(rng, n);
    const auto dim = static_cast<std::uint32_t>(1 + rng.below(12));

    DenseEmbeddingSet dense(dim);
    std::vector<float> row(dim);
    for (const auto& id : ids) {
      for (float& v : row) v = random_float(rng);
      dense.add<float>(id, row);
    }
    const auto d1 = encode_dense_set(dense);
    ASSERT_EQ(encode_dense_set(decode_dense_set(d1)), d1);

    SparseEmbeddingSet sparse(dim);
    for (const auto& id : ids) sparse.add(id, test::random_sparse(rng, dim, rng.uniform()));
    const auto s1 = encode_sparse_set(sparse);
    ASSERT_EQ(encode_sparse_set(decode_sparse_set(s1)), s1);
    const auto x1 = encode_index(build_index(sparse));
    ASSERT_EQ(encode_index(decode_index(x1)), x1);

    if (n > 0) {
      WordEmbeddingTable words(dim);
      for (const auto& id : ids) {
        for (float& v : row) v = random_float(rng);
        words.add<float>(id, row);
      }
      const auto w1 = encode_word_vectors(words);
      ASSERT_EQ(encode_word_vectors(parse_word_vectors(w1)), w1);
    }

    std::vector<CaptionRecord> caps;
    std::vector<LabeledImage> labels;
    std::vector<ExclusionQuery> queries;
    for (const auto& id : ids) {
      caps.push_back({id, random_id(rng) + " \"quoted\" \xc3\xa9\t" + random_id(rng)});
      LabeledImage img{id, {}};
      for (std::size_t j = rng.below(4); j > 0; --j) img.labels.insert(random_id(rng));
      labels.push_back(img);
      auto rel = unique_ids(rng, 1 + rng.below(3));
      std::sort(rel.begin(), rel.end());
      queries.push_back({id, id + "x", rel});
    }
    const auto c1 = encode_captions(caps);
    ASSERT_EQ(encode_captions(parse_captions(c1)), c1);
    const auto l1 = encode_labels(labels);
    ASSERT_EQ(encode_labels(parse_labels(l1)), l1);
    const auto q1 = encode_queries(queries);
    ASSERT_EQ(encode_queries(parse_queries(q1)), q1);

    const auto m = static_cast<std::uint32_t>(1 + rng.below(5));
    const auto sae = sae_init<float>(m, m + rng.below(5), rng.next_u64());
    const auto a1 = encode_sae_checkpoint(sae, random_id(rng));
    ASSERT_EQ(encode_sae_checkpoint(decode_sae_checkpoint(a1).model,
                                    decode_sae_checkpoint(a1).config_text),
              a1);
    const auto bi = bi_init<float>(m, m + 1 + rng.below(5), rng.next_u64());
    const auto b1 = encode_bi_checkpoint(bi, random_id(rng));
    const auto bck = decode_bi_checkpoint(b1);
    ASSERT_EQ(encode_bi_checkpoint(bck.model, bck.config_text), b1);
  }
}

std::string corrupt(Rng& rng, std::string bytes) {
  const int edits = 1 + static_cast<int>(rng.below(3));
  for (int e = 0; e < edits; ++e) {
    switch (rng.below(5)) {
      case 0:
        if (!bytes.empty()) bytes[rng.below(bytes.size())] ^= char(1u << rng.below(8));
        break;
      case 1:
        if (!bytes.empty()) bytes[rng.below(bytes.size())] = char(rng.below(256));
        break;
      case 2: bytes.resize(rng.below(bytes.size() + 1)); break;
      case 3: bytes.insert(rng.below(bytes.size() + 1), 1, char(rng.below(256))); break;
      default:
        if (!bytes.empty()) bytes.erase(rng.below(bytes.size()), 1 + rng.below(4));
        break;
    }
  }
  return bytes;
}

bool ids_unique(std::span<const std::string> ids) {
  std::set<std::string> s(ids.begin(), ids.end());
  return s.size() == ids.size() && !s.count("");
}

void check_sparse_invariants(const SparseEmbeddingSet& set) {
  ASSERT_TRUE(ids_unique(set.ids()));
  for (const auto& v : set.vectors()) {
    ASSERT_EQ(v.dim(), set.dim());
    const auto e = v.entries();
    for (std::size_t j = 0; j < e.size(); ++j) {
      ASSERT_LT(e[j].index, v.dim());
      ASSERT_TRUE(e[j].value > 0.0f && std::isfinite(e[j].value));
      if (j > 0) {
        ASSERT_LT(e[j - 1].index, e[j].index);
      }
    }
  }
}

template <class Decode, class Check>
void fuzz(const std::string& valid, Decode decode, Check check, std::uint64_t seed) {
  Rng rng(seed);
  int rejected = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto bytes = corrupt(rng, valid);
    try {
      const auto value = decode(bytes);
      check(value);
    } catch (const Error&) {
      ++rejected;
    }
  }
  EXPECT_GT(rejected, 0);
}

TEST(IoProperties, CorruptedBinaryFilesAreRejectedOrValid) {
  Rng rng(9);
  DenseEmbeddingSet dense(3);
  for (int i = 0; i < 6; ++i) {
    const auto v = test::random_vector(rng, 3);
    dense.add<double>("id" + std::to_string(i), v);
  }
  fuzz(encode_dense_set(dense), decode_dense_set, [](const DenseEmbeddingSet& s) {
    ASSERT_TRUE(ids_unique(s.ids()));
    for (std::size_t i = 0; i < s.size(); ++i) {
      ASSERT_EQ(s.row(i).size(), s.dim());
      for (float v : s.row(i)) ASSERT_TRUE(std::isfinite(v));
    }
  }, 1);

  const auto sparse = test::random_sparse_set(rng, 6, 20, 0.3);
  fuzz(encode_sparse_set(sparse), decode_sparse_set, check_sparse_invariants, 2);

  fuzz(encode_index(build_index(sparse)), decode_index, [](const InvertedIndex& idx) {
    for (std::uint32_t d = 0; d < idx.dim(); ++d) {
      const auto p = idx.postings(d);
      for (std::size_t j = 0; j < p.size(); ++j) {
        ASSERT_LT(p[j].ordinal, idx.size());
        ASSERT_GT(p[j].value, 0.0f);
        if (j > 0) {
          ASSERT_LT(p[j - 1].ordinal, p[j].ordinal);
        }
      }
    }
  }, 3);

  fuzz(encode_sae_checkpoint(sae_init<float>(3, 5, 1), "cfg"), decode_sae_checkpoint,
       [](const SaeCheckpoint<float>& ck) {
         ASSERT_TRUE(ck.model.finite());
         ASSERT_EQ(ck.model.encoder.weight.size(), ck.model.latent_dim() * ck.model.input_dim());
         ASSERT_EQ(ck.model.decoder.weight.size(), ck.model.latent_dim() * ck.model.input_dim());
       }, 4);

  fuzz(encode_bi_checkpoint(bi_init<float>(3, 5, 1), "cfg"), decode_bi_checkpoint,
       [](const BiCheckpoint<float>& ck) {
         ASSERT_TRUE(ck.model.finite());
         ASSERT_GT(ck.model.latent_dim(), ck.model.input_dim());
         ASSERT_EQ(ck.model.text.encoder.in_dim, ck.model.input_dim());
       }, 5);
}

TEST(IoProperties, CorruptedTextFilesAreRejectedOrValid) {
  fuzz(std::string("alpha 1.5 -2 0.25\nbeta 3 4 5e-3\ngamma 0 0 1\n"), parse_word_vectors,
       [](const WordEmbeddingTable& t) {
         ASSERT_GE(t.dim(), 1u);
         ASSERT_TRUE(ids_unique(t.tokens()));
         for (const auto& tok : t.tokens()) {
           for (char c : tok) ASSERT_FALSE(c >= 'A' && c <= 'Z');
         }
         for (std::size_t i = 0; i < t.size(); ++i) {
           for (float v : t.row(i)) ASSERT_TRUE(std::isfinite(v));
         }
       }, 6);

  fuzz(std::string("{\"image_id\":\"i1\",\"caption\":\"a dog\"}\n"
                   "{\"image_id\":\"i2\",\"caption\":\"a cat\"}\n"),
       parse_captions, [](const std::vector<CaptionRecord>& caps) {
         for (const auto& c : caps) {
           ASSERT_FALSE(c.image_id.empty());
           ASSERT_FALSE(c.caption.empty());
         }
       }, 7);

  fuzz(std::string("{\"image_id\":\"i1\",\"labels\":[\"dog\",\"cat\"]}\n"
                   "{\"image_id\":\"i2\",\"labels\":[\"cat\"]}\n"),
       parse_labels, [](const std::vector<LabeledImage>& labels) {
         std::set<std::string> ids;
         for (const auto& l : labels) {
           ASSERT_FALSE(l.image_id.empty());
           ASSERT_TRUE(ids.insert(l.image_id).second);
           for (const auto& s : l.labels) ASSERT_FALSE(s.empty());
         }
       }, 8);

  fuzz(std::string("{\"include\":\"dog\",\"exclude\":\"cat\",\"relevant\":[\"i1\",\"i2\"]}\n"),
       parse_queries, [](const std::vector<ExclusionQuery>& qs) {
         for (const auto& q : qs) {
           ASSERT_NE(q.include, q.exclude);
           ASSERT_FALSE(q.relevant.empty());
           ASSERT_TRUE(std::is_sorted(q.relevant.begin(), q.relevant.end()));
         }
       }, 9);

  fuzz(std::string("a|b\t1\tx\t2.000000\na|b\t2\ty\t1.000000\n"), parse_run,
       [](const RunMap& run) {
         for (const auto& [qid, ids] : run) {
           ASSERT_FALSE(qid.empty());
           ASSERT_TRUE(ids_unique(ids));
         }
       }, 10);
}

TEST(OutputStage, CommitsAllFilesTogether) {
  TempDir dir;
  OutputStage stage;
  stage.put(dir / "a.bin", "one");
  stage.put(dir / "b.bin", "two");
  EXPECT_FALSE(std::filesystem::exists(dir / "a.bin"));
  stage.commit();
  EXPECT_EQ(read_file(dir / "a.bin"), "one");
  EXPECT_EQ(read_file(dir / "b.bin"), "two");

  OutputStage failing;
  failing.put(dir / "c.bin", "three");
  failing.put(dir / "missing" / "d.bin", "four");
  EXPECT_THROW(failing.commit(), Error);
  EXPECT_FALSE(std::filesystem::exists(dir / "c.bin"));
  EXPECT_FALSE(std::filesystem::exists(dir / "c.bin.tmp"));
}

}  // namespace
}  // namespace spdr
