// Copyright (C) 2026 The spdr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "spdr/error.hpp"
#include "spdr/sparse_vector.hpp"

namespace spdr {

namespace detail {

// Id -> ordinal lookup shared by the keyed collections below.
class IdTable {
 public:
  std::size_t size() const { return ids_.size(); }
  const std::string& id(std::size_t ordinal) const { return ids_[ordinal]; }
  std::span<const std::string> ids() const { return ids_; }

  std::optional<std::size_t> find(std::string_view id) const {
    auto it = lookup_.find(std::string(id));
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
  }

  void add(std::string id) {
    if (id.empty()) throw Error("empty id");
    auto [it, inserted] = lookup_.emplace(id, ids_.size());
    if (!inserted) throw Error("duplicate id '" + id + "'");
    ids_.push_back(std::move(id));
  }

  void reserve(std::size_t n) {
    ids_.reserve(n);
    lookup_.reserve(n);
  }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> lookup_;
};

}  // namespace detail

/// Identifier-keyed k-dimensional dense vectors, stored row-major.
class DenseEmbeddingSet {
 public:
  DenseEmbeddingSet() = default;
  explicit DenseEmbeddingSet(std::uint32_t dim) : dim_(dim) {
    if (dim == 0) throw Error("dense set dim must be positive");
  }

  std::uint32_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.size() == 0; }
  const std::string& id(std::size_t ordinal) const { return ids_.id(ordinal); }
  std::span<const std::string> ids() const { return ids_.ids(); }
  std::optional<std::size_t> find(std::string_view id) const { return ids_.find(id); }

  std::span<const float> row(std::size_t ordinal) const {
    return std::span<const float>(data_).subspan(ordinal * dim_, dim_);
  }

  std::span<const float> at(std::string_view id) const {
    auto ord = find(id);
    if (!ord) throw Error("id '" + std::string(id) + "' not found");
    return row(*ord);
  }

  template <class Real>
  void add(std::string id, std::span<const Real> vec) {
    if (vec.size() != dim_) {
      throw Error("vector for '" + id + "' has length " + std::to_string(vec.size()) +
                  ", expected " + std::to_string(dim_));
    }
    for (Real v : vec) {
      if (!std::isfinite(static_cast<float>(v))) {
        throw Error("non-finite value in vector for '" + id + "'");
      }
    }
    ids_.add(std::move(id));
    for (Real v : vec) data_.push_back(static_cast<float>(v));
  }

  void add(std::string id, std::initializer_list<float> vec) {
    add<float>(std::move(id), std::span<const float>(vec.begin(), vec.size()));
  }

  void reserve(std::size_t n) {
    ids_.reserve(n);
    data_.reserve(n * dim_);
  }

 private:
  std::uint32_t dim_ = 1;
  detail::IdTable ids_;
  std::vector<float> data_;
};

/// Identifier-keyed sparse vectors sharing one dim.
class SparseEmbeddingSet {
 public:
  SparseEmbeddingSet() = default;
  explicit SparseEmbeddingSet(std::uint32_t dim) : dim_(dim) {
    if (dim == 0) throw Error("sparse set dim must be positive");
  }

  std::uint32_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.size() == 0; }
  const std::string& id(std::size_t ordinal) const { return ids_.id(ordinal); }
  std::span<const std::string> ids() const { return ids_.ids(); }
  std::optional<std::size_t> find(std::string_view id) const { return ids_.find(id); }
  const SparseVector& vector(std::size_t ordinal) const { return vectors_[ordinal]; }
  std::span<const SparseVector> vectors() const { return vectors_; }

  const SparseVector* lookup(std::string_view id) const {
    auto ord = find(id);
    return ord ? &vectors_[*ord] : nullptr;
  }

  void add(std::string id, SparseVector vec) {
    if (vec.dim() != dim_) {
      throw Error("vector for '" + id + "' has dim " + std::to_string(vec.dim()) +
                  ", expected " + std::to_string(dim_));
    }
    ids_.add(std::move(id));
    vectors_.push_back(std::move(vec));
  }

  void reserve(std::size_t n) {
    ids_.reserve(n);
    vectors_.reserve(n);
  }

  /// Mean fraction of the d dimensions that are nonzero, over all records.
  double mean_density() const {
    if (vectors_.empty()) return 0.0;
    double s = 0.0;
    for (const auto& v : vectors_) s += double(v.nnz()) / double(dim_);
    return s / double(vectors_.size());
  }

 private:
  std::uint32_t dim_ = 1;
  detail::IdTable ids_;
  std::vector<SparseVector> vectors_;
};

/// Pretrained word vectors keyed by lowercase token.
class WordEmbeddingTable {
 public:
  WordEmbeddingTable() = default;
  explicit WordEmbeddingTable(std::uint32_t dim) : vectors_(dim) {}

  std::uint32_t dim() const { return vectors_.dim(); }
  std::size_t size() const { return vectors_.size(); }
  const std::string& token(std::size_t ordinal) const { return vectors_.id(ordinal); }
  std::span<const std::string> tokens() const { return vectors_.ids(); }
  std::span<const float> row(std::size_t ordinal) const { return vectors_.row(ordinal); }
  std::optional<std::size_t> find(std::string_view token) const {
    return vectors_.find(token);
  }

  /// Adds a token; returns false (and counts a duplicate) if already present.
  template <class Real>
  bool add(std::string token, std::span<const Real> vec) {
    if (vectors_.find(token)) {
      ++duplicates_;
      return false;
    }
    vectors_.add(std::move(token), vec);
    return true;
  }

  std::size_t duplicate_count() const { return duplicates_; }

 private:
  DenseEmbeddingSet vectors_;
  std::size_t duplicates_ = 0;
};

struct CaptionRecord {
  std::string image_id;
  std::string caption;

  friend bool operator==(const CaptionRecord&, const CaptionRecord&) = default;
};

struct LabeledImage {
  std::string image_id;
  std::set<std::string> labels;

  friend bool operator==(const LabeledImage&, const LabeledImage&) = default;
};

/// Key for a caption-level record: "imageid#captionindex".
inline std::string caption_key(std::string_view image_id, std::size_t caption_index) {
  return std::string(image_id) + "#" + std::to_string(caption_index);
}

}  // namespace spdr
