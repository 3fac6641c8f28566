// Copyright (C) 2026 The spdr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Readers and writers for the on-disk formats. Binary formats are
// little-endian with 32-bit IEEE floats:
//
//   DEMB  "DEMB" u8=1 u32 count u32 dim { u16 id_len, id, dim x f32 }
//   SEMB  "SEMB" u8=1 u32 count u32 dim { u16 id_len, id, u32 nnz, nnz x (u32, f32) }
//   SAE1  "SAE1" u8=1 u32 m u32 d  enc W (d x m), enc b, dec W (m x d), dec b, u32 len, config
//   BIE1  "BIE1" u8=1 u32 k u32 d  image branch, text branch (as SAE1), u32 len, config
//   SIDX  see encode_index
//
// Text formats: word vectors are "token v1 ... vm" per line; captions,
// labels and queries are one JSON object per line; ranked runs are TSV.
// Every parse_* function works on in-memory content; read_* adds the path
// to error messages.

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "spdr/biencoder.hpp"
#include "spdr/caption.hpp"
#include "spdr/embedding_set.hpp"
#include "spdr/error.hpp"
#include "spdr/eval.hpp"
#include "spdr/retrieval.hpp"
#include "spdr/sae.hpp"
#include "spdr/sparse_vector.hpp"

static_assert(std::endian::native == std::endian::little, "spdr io assumes a little-endian host");

namespace spdr {

inline constexpr std::uint8_t kFormatVersion = 1;

// ---------------------------------------------------------------------------
// Files.

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error("read failed: " + path.string());
  return std::move(ss).str();
}

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error("write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error("cannot rename into " + path.string());
  }
}

/// Collects every output of a run and publishes them together, so a failed
/// run leaves no partial outputs behind.
class OutputStage {
 public:
  void put(std::filesystem::path path, std::string bytes) {
    files_.emplace_back(std::move(path), std::move(bytes));
  }

  const std::vector<std::pair<std::filesystem::path, std::string>>& files() const {
    return files_;
  }

  void commit() {
    std::vector<std::filesystem::path> temps;
    auto cleanup = [&] {
      std::error_code ec;
      for (const auto& t : temps) std::filesystem::remove(t, ec);
    };
    for (const auto& [path, bytes] : files_) {
      auto tmp = path;
      tmp += ".tmp";
      temps.push_back(tmp);
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      out.flush();
      if (!out) {
        cleanup();
        throw Error("cannot write " + tmp.string());
      }
    }
    for (std::size_t i = 0; i < files_.size(); ++i) {
      std::error_code ec;
      std::filesystem::rename(temps[i], files_[i].first, ec);
      if (ec) {
        cleanup();
        throw Error("cannot rename into " + files_[i].first.string());
      }
    }
    files_.clear();
  }

 private:
  std::vector<std::pair<std::filesystem::path, std::string>> files_;
};

// ---------------------------------------------------------------------------
// Little-endian byte codec.

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { raw(&v, sizeof v); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void f32(float v) { raw(&v, sizeof v); }
  void bytes(std::string_view s) { buf_.append(s); }

  const std::string& str() const& { return buf_; }
  std::string str() && { return std::move(buf_); }

 private:
  void raw(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }
  bool has(std::uint64_t n) const { return n <= remaining(); }

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint16_t u16() { return load<std::uint16_t>(); }
  std::uint32_t u32() { return load<std::uint32_t>(); }
  float f32() { return load<float>(); }
  std::string_view bytes(std::size_t n) { return take(n); }

 private:
  template <class T>
  T load() {
    T v;
    std::memcpy(&v, take(sizeof v).data(), sizeof v);
    return v;
  }

  // Callers check has() first; running out here is a logic error.
  std::string_view take(std::size_t n) {
    if (n > remaining()) throw Error("unexpected end of data");
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::string_view data_;
  std::size_t pos_ = 0;
};

namespace detail {

inline void expect_magic(ByteReader& r, std::string_view magic) {
  if (!r.has(magic.size()) || r.bytes(magic.size()) != magic) throw Error("bad magic");
  if (!r.has(1)) throw Error("truncated header");
  const std::uint8_t version = r.u8();
  if (version != kFormatVersion) {
    throw Error("unsupported version " + std::to_string(version));
  }
}

inline void put_id(ByteWriter& w, const std::string& id) {
  if (id.size() > std::numeric_limits<std::uint16_t>::max()) throw Error("id too long: " + id);
  w.u16(static_cast<std::uint16_t>(id.size()));
  w.bytes(id);
}

inline std::uint32_t checked_u32(std::size_t n, const char* what) {
  if (n > std::numeric_limits<std::uint32_t>::max()) throw Error(std::string(what) + " too large");
  return static_cast<std::uint32_t>(n);
}

inline std::string record_error(std::size_t record, const std::string& what) {
  return "record " + std::to_string(record) + ": " + what;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// DEMB.

inline std::string encode_dense_set(const DenseEmbeddingSet& set) {
  ByteWriter w;
  w.bytes("DEMB");
  w.u8(kFormatVersion);
  w.u32(detail::checked_u32(set.size(), "record count"));
  w.u32(set.dim());
  for (std::size_t i = 0; i < set.size(); ++i) {
    detail::put_id(w, set.id(i));
    for (float v : set.row(i)) w.f32(v);
  }
  return std::move(w).str();
}

inline DenseEmbeddingSet decode_dense_set(std::string_view data) {
  ByteReader r(data);
  detail::expect_magic(r, "DEMB");
  if (!r.has(8)) throw Error("truncated header");
  const std::uint32_t count = r.u32();
  const std::uint32_t dim = r.u32();
  if (dim == 0) throw Error("dim must be positive");
  DenseEmbeddingSet set(dim);
  const std::uint64_t min_record = 2 + 4ull * dim;
  if (count > 0 && !r.has(min_record)) throw Error("truncated at record 1");
  set.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, r.remaining() / min_record)));
  std::vector<float> row(count > 0 ? dim : 0);
  for (std::uint32_t n = 1; n <= count; ++n) {
    if (!r.has(2)) throw Error("truncated at record " + std::to_string(n));
    const std::uint16_t len = r.u16();
    if (!r.has(std::uint64_t(len) + 4ull * dim)) {
      throw Error("truncated at record " + std::to_string(n));
    }
    std::string id(r.bytes(len));
    for (auto& v : row) v = r.f32();
    try {
      set.add<float>(std::move(id), row);
    } catch (const Error& e) {
      throw Error(detail::record_error(n, e.what()));
    }
  }
  if (!r.done()) {
    throw Error("trailing bytes after record " + std::to_string(count));
  }
  return set;
}

// ---------------------------------------------------------------------------
// SEMB.

inline std::string encode_sparse_set(const SparseEmbeddingSet& set) {
  ByteWriter w;
  w.bytes("SEMB");
  w.u8(kFormatVersion);
  w.u32(detail::checked_u32(set.size(), "record count"));
  w.u32(set.dim());
  for (std::size_t i = 0; i < set.size(); ++i) {
    detail::put_id(w, set.id(i));
    const auto& v = set.vector(i);
    w.u32(static_cast<std::uint32_t>(v.nnz()));
    for (const auto& e : v.entries()) {
      w.u32(e.index);
      w.f32(e.value);
    }
  }
  return std::move(w).str();
}

inline SparseEmbeddingSet decode_sparse_set(std::string_view data) {
  ByteReader r(data);
  detail::expect_magic(r, "SEMB");
  if (!r.has(8)) throw Error("truncated header");
  const std::uint32_t count = r.u32();
  const std::uint32_t dim = r.u32();
  if (dim == 0) throw Error("dim must be positive");
  SparseEmbeddingSet set(dim);
  set.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, r.remaining() / 6)));
  for (std::uint32_t n = 1; n <= count; ++n) {
    const auto truncated = [&] { return Error("truncated at record " + std::to_string(n)); };
    if (!r.has(2)) throw truncated();
    const std::uint16_t len = r.u16();
    if (!r.has(std::uint64_t(len) + 4)) throw truncated();
    std::string id(r.bytes(len));
    const std::uint32_t nnz = r.u32();
    if (nnz > dim) throw Error(detail::record_error(n, "nnz exceeds dim"));
    if (!r.has(8ull * nnz)) throw truncated();
    std::vector<SparseEntry> entries(nnz);
    for (std::uint32_t j = 0; j < nnz; ++j) {
      entries[j].index = r.u32();
      entries[j].value = r.f32();
      if (j > 0 && entries[j].index <= entries[j - 1].index) {
        throw Error(detail::record_error(n, "indices not strictly increasing"));
      }
      if (entries[j].index >= dim) {
        throw Error(detail::record_error(n, "index " + std::to_string(entries[j].index) +
                                                " out of range for dim " + std::to_string(dim)));
      }
      if (!(entries[j].value > 0.0f) || !std::isfinite(entries[j].value)) {
        throw Error(detail::record_error(n, "value must be positive and finite"));
      }
    }
    try {
      set.add(std::move(id), SparseVector(dim, std::move(entries)));
    } catch (const Error& e) {
      throw Error(detail::record_error(n, e.what()));
    }
  }
  if (!r.done()) {
    throw Error("trailing bytes after record " + std::to_string(count));
  }
  return set;
}

// ---------------------------------------------------------------------------
// SIDX: an inverted index stored dimension-major.
//   "SIDX" u8=1 u32 count u32 dim { u16 id_len, id } x count
//   { u32 n, n x (u32 ordinal, f32 value) } x dim

inline std::string encode_index(const InvertedIndex& index) {
  ByteWriter w;
  w.bytes("SIDX");
  w.u8(kFormatVersion);
  w.u32(detail::checked_u32(index.size(), "record count"));
  w.u32(index.dim());
  for (std::size_t i = 0; i < index.size(); ++i) detail::put_id(w, index.id(i));
  for (std::uint32_t d = 0; d < index.dim(); ++d) {
    const auto postings = index.postings(d);
    w.u32(static_cast<std::uint32_t>(postings.size()));
    for (const auto& p : postings) {
      w.u32(p.ordinal);
      w.f32(p.value);
    }
  }
  return std::move(w).str();
}

/// Rebuilds the records from the postings and re-indexes them.
inline InvertedIndex decode_index(std::string_view data) {
  ByteReader r(data);
  detail::expect_magic(r, "SIDX");
  if (!r.has(8)) throw Error("truncated header");
  const std::uint32_t count = r.u32();
  const std::uint32_t dim = r.u32();
  if (dim == 0) throw Error("dim must be positive");
  if (!r.has(2ull * count)) throw Error("truncated id table");
  std::vector<std::string> ids;
  ids.reserve(count);
  for (std::uint32_t n = 1; n <= count; ++n) {
    if (!r.has(2)) throw Error("truncated id table");
    const std::uint16_t len = r.u16();
    if (!r.has(len)) throw Error("truncated id table");
    ids.emplace_back(r.bytes(len));
  }
  if (!r.has(4ull * dim)) throw Error("truncated postings");
  std::vector<std::vector<SparseEntry>> entries(count);
  for (std::uint32_t d = 0; d < dim; ++d) {
    if (!r.has(4)) throw Error("truncated postings at dim " + std::to_string(d));
    const std::uint32_t n = r.u32();
    if (n > count || !r.has(8ull * n)) {
      throw Error("truncated postings at dim " + std::to_string(d));
    }
    std::int64_t prev = -1;
    for (std::uint32_t j = 0; j < n; ++j) {
      const std::uint32_t ord = r.u32();
      const float value = r.f32();
      if (ord >= count || std::int64_t(ord) <= prev) {
        throw Error("bad posting ordinal at dim " + std::to_string(d));
      }
      if (!(value > 0.0f) || !std::isfinite(value)) {
        throw Error("value must be positive and finite at dim " + std::to_string(d));
      }
      prev = ord;
      entries[ord].push_back({d, value});
    }
  }
  if (!r.done()) throw Error("trailing bytes after postings");
  SparseEmbeddingSet set(dim);
  set.reserve(count);
  for (std::uint32_t n = 0; n < count; ++n) {
    set.add(std::move(ids[n]), SparseVector(dim, std::move(entries[n])));
  }
  return InvertedIndex(set);
}

// ---------------------------------------------------------------------------
// Checkpoints.

namespace detail {

template <std::floating_point Real>
void put_affine(ByteWriter& w, const AffineMap<Real>& map) {
  for (Real v : map.weight) w.f32(static_cast<float>(v));
  for (Real v : map.bias) w.f32(static_cast<float>(v));
}

inline AffineMap<float> get_affine(ByteReader& r, std::size_t out, std::size_t in) {
  AffineMap<float> map(out, in);
  for (auto& v : map.weight) v = r.f32();
  for (auto& v : map.bias) v = r.f32();
  return map;
}

inline void put_config_text(ByteWriter& w, std::string_view text) {
  w.u32(checked_u32(text.size(), "config text"));
  w.bytes(text);
}

inline std::string get_config_text(ByteReader& r) {
  if (!r.has(4)) throw Error("truncated config text");
  const std::uint32_t len = r.u32();
  if (!r.has(len)) throw Error("truncated config text");
  std::string text(r.bytes(len));
  if (!r.done()) throw Error("trailing bytes after config text");
  return text;
}

// Reads the u32 shape pair and checks that the parameter block fits.
inline std::pair<std::uint32_t, std::uint32_t> get_shape(ByteReader& r, std::uint64_t blocks) {
  if (!r.has(8)) throw Error("truncated header");
  const std::uint32_t a = r.u32();
  const std::uint32_t b = r.u32();
  if (a == 0 || b == 0) throw Error("shape dims must be positive");
  const std::uint64_t floats = blocks * (2ull * a * b + a + b);
  if (!r.has(4 * floats)) throw Error("truncated parameters");
  return {a, b};
}

}  // namespace detail

template <std::floating_point Real = float>
struct SaeCheckpoint {
  SaeModel<Real> model;
  std::string config_text;
};

template <std::floating_point Real>
std::string encode_sae_checkpoint(const SaeModel<Real>& model, std::string_view config_text) {
  ByteWriter w;
  w.bytes("SAE1");
  w.u8(kFormatVersion);
  w.u32(detail::checked_u32(model.input_dim(), "m"));
  w.u32(detail::checked_u32(model.latent_dim(), "d"));
  detail::put_affine(w, model.encoder);
  detail::put_affine(w, model.decoder);
  detail::put_config_text(w, config_text);
  return std::move(w).str();
}

inline SaeCheckpoint<float> decode_sae_checkpoint(std::string_view data) {
  ByteReader r(data);
  detail::expect_magic(r, "SAE1");
  const auto [m, d] = detail::get_shape(r, 1);
  SaeCheckpoint<float> ck;
  ck.model.encoder = detail::get_affine(r, d, m);
  ck.model.decoder = detail::get_affine(r, m, d);
  ck.config_text = detail::get_config_text(r);
  if (!ck.model.finite()) throw Error("non-finite parameter in checkpoint");
  return ck;
}

template <std::floating_point Real = float>
struct BiCheckpoint {
  BiEncoderModel<Real> model;
  std::string config_text;
};

template <std::floating_point Real>
std::string encode_bi_checkpoint(const BiEncoderModel<Real>& model, std::string_view config_text) {
  ByteWriter w;
  w.bytes("BIE1");
  w.u8(kFormatVersion);
  w.u32(detail::checked_u32(model.input_dim(), "k"));
  w.u32(detail::checked_u32(model.latent_dim(), "d"));
  for (const auto* branch : {&model.image, &model.text}) {
    detail::put_affine(w, branch->encoder);
    detail::put_affine(w, branch->decoder);
  }
  detail::put_config_text(w, config_text);
  return std::move(w).str();
}

inline BiCheckpoint<float> decode_bi_checkpoint(std::string_view data) {
  ByteReader r(data);
  detail::expect_magic(r, "BIE1");
  const auto [k, d] = detail::get_shape(r, 2);
  if (d <= k) throw Error("checkpoint latent dim must exceed input dim");
  BiCheckpoint<float> ck;
  for (auto* branch : {&ck.model.image, &ck.model.text}) {
    branch->encoder = detail::get_affine(r, d, k);
    branch->decoder = detail::get_affine(r, k, d);
  }
  ck.config_text = detail::get_config_text(r);
  if (!ck.model.finite()) throw Error("non-finite parameter in checkpoint");
  return ck;
}

// ---------------------------------------------------------------------------
// Word vectors.

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

// Locale-independent decimal parse of the whole field.
inline bool parse_real(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

template <class Fn>
void for_each_line(std::string_view content, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    fn(++line_no, line);
    pos = end + 1;
  }
}

inline std::string line_error(std::size_t line_no, const std::string& what) {
  return "line " + std::to_string(line_no) + ": " + what;
}

inline bool blank(std::string_view line) {
  return line.find_first_not_of(" \t") == std::string_view::npos;
}

}  // namespace detail

inline WordEmbeddingTable parse_word_vectors(std::string_view content) {
  WordEmbeddingTable table;
  bool have_dim = false;
  std::vector<double> values;
  detail::for_each_line(content, [&](std::size_t line_no, std::string_view line) {
    if (detail::blank(line)) return;
    const auto fields = detail::split_fields(line);
    const std::size_t found = fields.size() - 1;
    if (!have_dim) {
      if (found == 0) throw Error(detail::line_error(line_no, "no values after token"));
      table = WordEmbeddingTable(static_cast<std::uint32_t>(found));
      have_dim = true;
    }
    if (found != table.dim()) {
      throw Error(detail::line_error(line_no, "expected " + std::to_string(table.dim()) +
                                                  " values, found " + std::to_string(found)));
    }
    values.resize(found);
    for (std::size_t i = 0; i < found; ++i) {
      if (!detail::parse_real(fields[i + 1], values[i])) {
        throw Error(detail::line_error(line_no, "bad number '" + std::string(fields[i + 1]) + "'"));
      }
    }
    table.add<double>(to_lower_ascii(fields[0]), values);
  });
  if (!have_dim) throw Error("empty file");
  return table;
}

inline std::string format_float(float v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string encode_word_vectors(const WordEmbeddingTable& table) {
  std::string out;
  for (std::size_t i = 0; i < table.size(); ++i) {
    out += table.token(i);
    for (float v : table.row(i)) {
      out += ' ';
      out += format_float(v);
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Line-delimited JSON records.

namespace detail {

using nlohmann::json;

inline json parse_json_line(std::size_t line_no, std::string_view line) {
  json j = json::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(line_error(line_no, "malformed record"));
  return j;
}

inline std::string string_field(const json& j, std::size_t line_no, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) throw Error(line_error(line_no, std::string("missing field ") + name));
  if (!it->is_string()) {
    throw Error(line_error(line_no, std::string("field ") + name + " must be a string"));
  }
  auto s = it->get<std::string>();
  if (s.empty()) throw Error(line_error(line_no, std::string("field ") + name + " is empty"));
  return s;
}

inline std::vector<std::string> string_list_field(const json& j, std::size_t line_no,
                                                  const char* name) {
  auto it = j.find(name);
  if (it == j.end()) throw Error(line_error(line_no, std::string("missing field ") + name));
  const auto bad = [&] {
    return Error(line_error(line_no, std::string("field ") + name + " must be a list of strings"));
  };
  if (!it->is_array()) throw bad();
  std::vector<std::string> out;
  for (const auto& v : *it) {
    if (!v.is_string()) throw bad();
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace detail

inline std::vector<CaptionRecord> parse_captions(std::string_view content) {
  std::vector<CaptionRecord> out;
  detail::for_each_line(content, [&](std::size_t line_no, std::string_view line) {
    if (detail::blank(line)) return;
    const auto j = detail::parse_json_line(line_no, line);
    out.push_back({detail::string_field(j, line_no, "image_id"),
                   detail::string_field(j, line_no, "caption")});
  });
  return out;
}

inline std::string encode_captions(std::span<const CaptionRecord> captions) {
  std::string out;
  for (const auto& c : captions) {
    out += nlohmann::json{{"image_id", c.image_id}, {"caption", c.caption}}.dump();
    out += '\n';
  }
  return out;
}

inline std::vector<LabeledImage> parse_labels(std::string_view content) {
  std::vector<LabeledImage> out;
  std::set<std::string> seen;
  detail::for_each_line(content, [&](std::size_t line_no, std::string_view line) {
    if (detail::blank(line)) return;
    const auto j = detail::parse_json_line(line_no, line);
    LabeledImage img{detail::string_field(j, line_no, "image_id"), {}};
    for (auto& l : detail::string_list_field(j, line_no, "labels")) {
      if (l.empty()) throw Error(detail::line_error(line_no, "empty label"));
      img.labels.insert(std::move(l));
    }
    if (!seen.insert(img.image_id).second) {
      throw Error(detail::line_error(line_no, "duplicate image_id '" + img.image_id + "'"));
    }
    out.push_back(std::move(img));
  });
  return out;
}

inline std::string encode_labels(std::span<const LabeledImage> labels) {
  std::string out;
  for (const auto& img : labels) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& l : img.labels) list.push_back(l);
    out += nlohmann::json{{"image_id", img.image_id}, {"labels", list}}.dump();
    out += '\n';
  }
  return out;
}

inline std::vector<ExclusionQuery> parse_queries(std::string_view content) {
  std::vector<ExclusionQuery> out;
  detail::for_each_line(content, [&](std::size_t line_no, std::string_view line) {
    if (detail::blank(line)) return;
    const auto j = detail::parse_json_line(line_no, line);
    ExclusionQuery q{detail::string_field(j, line_no, "include"),
                     detail::string_field(j, line_no, "exclude"),
                     detail::string_list_field(j, line_no, "relevant")};
    if (q.include == q.exclude) throw Error(detail::line_error(line_no, "include equals exclude"));
    if (q.relevant.empty()) throw Error(detail::line_error(line_no, "empty relevant set"));
    std::sort(q.relevant.begin(), q.relevant.end());
    if (std::adjacent_find(q.relevant.begin(), q.relevant.end()) != q.relevant.end()) {
      throw Error(detail::line_error(line_no, "duplicate id in relevant"));
    }
    out.push_back(std::move(q));
  });
  return out;
}

inline std::string encode_queries(std::span<const ExclusionQuery> queries) {
  std::string out;
  for (const auto& q : queries) {
    out += nlohmann::json{{"include", q.include}, {"exclude", q.exclude}, {"relevant", q.relevant}}
               .dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ranked runs: "query_id \t rank \t id \t score" with 1-based ranks.

inline std::string format_score(double score) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", score);
  return buf;
}

inline void append_run(std::string& out, std::string_view query_id, const RankedList& list) {
  for (std::size_t i = 0; i < list.hits.size(); ++i) {
    out += query_id;
    out += '\t';
    out += std::to_string(i + 1);
    out += '\t';
    out += list.hits[i].id;
    out += '\t';
    out += format_score(list.hits[i].score);
    out += '\n';
  }
}

inline RunMap parse_run(std::string_view content) {
  RunMap run;
  detail::for_each_line(content, [&](std::size_t line_no, std::string_view line) {
    if (detail::blank(line)) return;
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (true) {
      const std::size_t tab = line.find('\t', pos);
      fields.push_back(line.substr(pos, tab == std::string_view::npos ? line.npos : tab - pos));
      if (tab == std::string_view::npos) break;
      pos = tab + 1;
    }
    if (fields.size() != 4) {
      throw Error(detail::line_error(line_no, "expected 4 tab-separated fields, found " +
                                                  std::to_string(fields.size())));
    }
    std::size_t rank = 0;
    const auto [ptr, ec] =
        std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), rank);
    if (ec != std::errc() || ptr != fields[1].data() + fields[1].size() || rank == 0) {
      throw Error(detail::line_error(line_no, "bad rank '" + std::string(fields[1]) + "'"));
    }
    double score = 0.0;
    if (!detail::parse_real(fields[3], score)) {
      throw Error(detail::line_error(line_no, "bad score '" + std::string(fields[3]) + "'"));
    }
    if (fields[0].empty() || fields[2].empty()) throw Error(detail::line_error(line_no, "empty id"));
    auto& list = run[std::string(fields[0])];
    if (rank != list.size() + 1) {
      throw Error(detail::line_error(line_no, "rank " + std::to_string(rank) + " out of order"));
    }
    const std::string id(fields[2]);
    if (std::find(list.begin(), list.end(), id) != list.end()) {
      throw Error(detail::line_error(line_no, "id '" + id + "' repeated in one ranked list"));
    }
    list.push_back(id);
  });
  return run;
}

// ---------------------------------------------------------------------------
// Metric reports.

inline std::string encode_report_text(const MetricReport& report) {
  std::string out = "query";
  for (const auto& m : report.metrics) out += "\t" + m.name();
  out += '\n';
  for (const auto& q : report.queries) {
    out += q.query_id;
    for (double v : q.values) out += "\t" + format_score(v);
    if (q.missing) out += "\t(missing)";
    out += '\n';
  }
  out += "mean";
  for (double v : report.means) out += "\t" + format_score(v);
  out += "\nqueries\t" + std::to_string(report.query_count()) + "\nmissing\t" +
         std::to_string(report.missing_count) + "\n";
  return out;
}

inline nlohmann::ordered_json report_json(const MetricReport& report) {
  nlohmann::ordered_json j;
  j["query_count"] = report.query_count();
  j["missing"] = report.missing_count;
  nlohmann::ordered_json means = nlohmann::ordered_json::object();
  for (std::size_t m = 0; m < report.metrics.size(); ++m) {
    means[report.metrics[m].name()] = report.means[m];
  }
  j["means"] = means;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& q : report.queries) {
    nlohmann::ordered_json row;
    row["query"] = q.query_id;
    row["missing"] = q.missing;
    for (std::size_t m = 0; m < report.metrics.size(); ++m) {
      row[report.metrics[m].name()] = q.values[m];
    }
    rows.push_back(std::move(row));
  }
  j["queries"] = rows;
  return j;
}

inline std::string encode_report_json(const MetricReport& report) {
  return report_json(report).dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Path-level wrappers.

namespace detail {

template <class Fn>
auto with_path(const std::filesystem::path& path, Fn&& fn) {
  const std::string content = read_file(path);
  try {
    return fn(std::string_view(content));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

}  // namespace detail

inline WordEmbeddingTable read_word_vectors(const std::filesystem::path& p) {
  return detail::with_path(p, parse_word_vectors);
}
inline DenseEmbeddingSet read_dense_set(const std::filesystem::path& p) {
  return detail::with_path(p, decode_dense_set);
}
inline SparseEmbeddingSet read_sparse_set(const std::filesystem::path& p) {
  return detail::with_path(p, decode_sparse_set);
}
inline std::vector<CaptionRecord> read_captions(const std::filesystem::path& p) {
  return detail::with_path(p, parse_captions);
}
inline std::vector<LabeledImage> read_labels(const std::filesystem::path& p) {
  return detail::with_path(p, parse_labels);
}
inline std::vector<ExclusionQuery> read_queries(const std::filesystem::path& p) {
  return detail::with_path(p, parse_queries);
}
inline RunMap read_run(const std::filesystem::path& p) { return detail::with_path(p, parse_run); }
inline InvertedIndex read_index(const std::filesystem::path& p) {
  return detail::with_path(p, decode_index);
}
inline SaeCheckpoint<float> load_sae_checkpoint(const std::filesystem::path& p) {
  return detail::with_path(p, decode_sae_checkpoint);
}
inline BiCheckpoint<float> load_bi_checkpoint(const std::filesystem::path& p) {
  return detail::with_path(p, decode_bi_checkpoint);
}

inline void write_dense_set(const DenseEmbeddingSet& set, const std::filesystem::path& p) {
  write_file_atomic(p, encode_dense_set(set));
}
inline void write_sparse_set(const SparseEmbeddingSet& set, const std::filesystem::path& p) {
  write_file_atomic(p, encode_sparse_set(set));
}
template <std::floating_point Real>
void save_sae_checkpoint(const SaeModel<Real>& model, std::string_view config_text,
                         const std::filesystem::path& p) {
  write_file_atomic(p, encode_sae_checkpoint(model, config_text));
}
template <std::floating_point Real>
void save_bi_checkpoint(const BiEncoderModel<Real>& model, std::string_view config_text,
                        const std::filesystem::path& p) {
  write_file_atomic(p, encode_bi_checkpoint(model, config_text));
}

}  // namespace spdr
