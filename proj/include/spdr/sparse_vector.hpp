// Copyright (C) 2026 The spdr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spdr/error.hpp"

namespace spdr {

struct SparseEntry {
  std::uint32_t index = 0;
  float value = 0.0f;

  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

/// A non-negative d-dimensional vector stored as (index, value) pairs with
/// strictly increasing indices and strictly positive finite values.
class SparseVector {
 public:
  SparseVector() = default;
  explicit SparseVector(std::uint32_t dim) : dim_(dim) {}

  /// Validating constructor; throws spdr::Error on any invariant violation.
  SparseVector(std::uint32_t dim, std::vector<SparseEntry> entries)
      : dim_(dim), entries_(std::move(entries)) {
    validate();
  }

  /// Builds from a dense vector, dropping exact zeros. Values narrowed to
  /// float that underflow to zero are dropped too.
  template <class Real>
  static SparseVector from_dense(std::span<const Real> dense) {
    SparseVector out(static_cast<std::uint32_t>(dense.size()));
    for (std::size_t i = 0; i < dense.size(); ++i) {
      if (!(dense[i] >= Real(0))) {
        throw Error("sparse vector value must be non-negative at index " +
                    std::to_string(i));
      }
      const float v = static_cast<float>(dense[i]);
      if (v > 0.0f) out.entries_.push_back({static_cast<std::uint32_t>(i), v});
    }
    out.validate();
    return out;
  }

  std::uint32_t dim() const { return dim_; }
  std::span<const SparseEntry> entries() const { return entries_; }
  std::size_t nnz() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  float value_at(std::uint32_t index) const {
    auto it = std::lower_bound(
        entries_.begin(), entries_.end(), index,
        [](const SparseEntry& e, std::uint32_t i) { return e.index < i; });
    return (it != entries_.end() && it->index == index) ? it->value : 0.0f;
  }

  template <class Real = double>
  std::vector<Real> to_dense() const {
    std::vector<Real> out(dim_, Real(0));
    for (const auto& e : entries_) out[e.index] = static_cast<Real>(e.value);
    return out;
  }

  /// Euclidean norm, accumulated in double in index order.
  double norm() const {
    double s = 0.0;
    for (const auto& e : entries_) s += double(e.value) * double(e.value);
    return std::sqrt(s);
  }

  friend bool operator==(const SparseVector&, const SparseVector&) = default;

 private:
  void validate() const {
    if (dim_ == 0) throw Error("sparse vector dim must be positive");
    if (entries_.size() > dim_) throw Error("sparse vector has more entries than dim");
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      if (i > 0 && entries_[i - 1].index >= e.index) {
        throw Error("indices not strictly increasing");
      }
      if (e.index >= dim_) {
        throw Error("index " + std::to_string(e.index) + " out of range for dim " +
                    std::to_string(dim_));
      }
      if (!(e.value > 0.0f) || !std::isfinite(e.value)) {
        throw Error("value must be positive and finite at index " +
                    std::to_string(e.index));
      }
    }
  }

  std::uint32_t dim_ = 1;
  std::vector<SparseEntry> entries_;
};

/// Dot product of two sparse vectors, accumulated in double in index order.
inline double dot(const SparseVector& a, const SparseVector& b) {
  auto ea = a.entries();
  auto eb = b.entries();
  std::size_t i = 0, j = 0;
  double s = 0.0;
  while (i < ea.size() && j < eb.size()) {
    if (ea[i].index < eb[j].index) {
      ++i;
    } else if (eb[j].index < ea[i].index) {
      ++j;
    } else {
      s += double(ea[i].value) * double(eb[j].value);
      ++i;
      ++j;
    }
  }
  return s;
}

}  // namespace spdr
