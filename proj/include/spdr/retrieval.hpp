// Copyright (C) 2026 The spdr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spdr/biencoder.hpp"
#include "spdr/caption.hpp"
#include "spdr/embedding_set.hpp"
#include "spdr/error.hpp"
#include "spdr/sparse_vector.hpp"

namespace spdr {

struct Hit {
  std::string id;
  double score = 0.0;

  friend bool operator==(const Hit&, const Hit&) = default;
};

/// Hits ordered by score descending, then id ascending.
struct RankedList {
  std::vector<Hit> hits;
  std::size_t cutoff = 0;
  bool empty_dims = false;  // exclusion left no dimension to score

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    out.reserve(hits.size());
    for (const auto& h : hits) out.push_back(h.id);
    return out;
  }
};

namespace detail {

struct Scored {
  std::size_t ordinal;
  double score;
};

// Keeps the K best candidates under (score desc, id asc).
template <class IdOf>
RankedList take_top(std::vector<Scored> scored, std::size_t k, IdOf&& id_of) {
  auto better = [&](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return id_of(a.ordinal) < id_of(b.ordinal);
  };
  const std::size_t keep = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep),
                    scored.end(), better);
  RankedList out;
  out.cutoff = k;
  out.hits.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    out.hits.push_back({id_of(scored[i].ordinal), scored[i].score});
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Sparse inverted index.

struct Posting {
  std::uint32_t ordinal = 0;
  float value = 0.0f;
};

/// Per-dimension posting lists over a sparse embedding set. Immutable once
/// built; safe for concurrent searches.
class InvertedIndex {
 public:
  explicit InvertedIndex(const SparseEmbeddingSet& set)
      : dim_(set.dim()), postings_(set.dim()) {
    ids_.reserve(set.size());
    norms_.reserve(set.size());
    for (std::size_t ord = 0; ord < set.size(); ++ord) {
      ids_.add(set.id(ord));
      const auto& v = set.vector(ord);
      for (const auto& e : v.entries()) {
        postings_[e.index].push_back({static_cast<std::uint32_t>(ord), e.value});
      }
      norms_.push_back(v.norm());
    }
  }

  std::uint32_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  const std::string& id(std::size_t ordinal) const { return ids_.id(ordinal); }
  std::optional<std::size_t> find(std::string_view id) const { return ids_.find(id); }
  std::span<const Posting> postings(std::uint32_t dim) const { return postings_[dim]; }
  double norm(std::size_t ordinal) const { return norms_[ordinal]; }

  std::size_t total_postings() const {
    std::size_t n = 0;
    for (const auto& p : postings_) n += p.size();
    return n;
  }

 private:
  std::uint32_t dim_;
  detail::IdTable ids_;
  std::vector<std::vector<Posting>> postings_;
  std::vector<double> norms_;
};

inline InvertedIndex build_index(const SparseEmbeddingSet& set) { return InvertedIndex(set); }

/// Top-K records by dot product with q. Each record's score is accumulated
/// in double over query dimensions in increasing order.
inline RankedList search(const InvertedIndex& index, const SparseVector& query, std::size_t k) {
  if (query.dim() != index.dim()) {
    throw Error("query dim " + std::to_string(query.dim()) + " does not match index dim " +
                std::to_string(index.dim()));
  }
  std::vector<double> acc(index.size(), 0.0);
  std::vector<std::size_t> touched;
  for (const auto& qe : query.entries()) {
    for (const auto& p : index.postings(qe.index)) {
      if (acc[p.ordinal] == 0.0) touched.push_back(p.ordinal);
      acc[p.ordinal] += double(qe.value) * double(p.value);
    }
  }
  std::vector<detail::Scored> scored;
  scored.reserve(touched.size());
  for (std::size_t ord : touched) scored.push_back({ord, acc[ord]});
  return detail::take_top(std::move(scored), k,
                          [&](std::size_t ord) -> const std::string& { return index.id(ord); });
}

// ---------------------------------------------------------------------------
// Exclusion retrieval.

using DimSet = IndexMask;

struct ExclusionParams {
  std::size_t k_extract = 10;
  double threshold = 80.0;  // percent of aggregate magnitude
  std::size_t k_return = 10;

  void validate() const {
    if (k_extract == 0) throw UsageError("retrieval.k_extract must be positive");
    if (!(threshold > 0.0 && threshold <= 100.0)) {
      throw UsageError("retrieval.threshold must lie in (0,100]");
    }
    if (k_return == 0) throw UsageError("retrieval.k_return must be positive");
  }
};

/// Smallest prefix of dimensions, sorted by aggregate descending (ties to
/// the lower index), whose cumulative aggregate reaches threshold% of the
/// total. threshold = 100 keeps every positive dimension.
inline DimSet select_magnitude_prefix(std::span<const double> aggregates, double threshold) {
  std::vector<std::uint32_t> order;
  double total = 0.0;
  for (std::size_t i = 0; i < aggregates.size(); ++i) {
    if (aggregates[i] > 0.0) {
      order.push_back(static_cast<std::uint32_t>(i));
      total += aggregates[i];
    }
  }
  const auto dim = static_cast<std::uint32_t>(aggregates.size());
  if (order.empty()) return DimSet(dim);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return aggregates[a] != aggregates[b] ? aggregates[a] > aggregates[b] : a < b;
  });
  if (threshold >= 100.0) return DimSet(dim, std::move(order));
  // Values are stored as float; the slack keeps exact-decimal cut points
  // such as 0.5 + 0.3 >= 80% of 1.0 from flipping on representation error.
  const double target = threshold / 100.0 * total * (1.0 - 1e-6);
  double cumulative = 0.0;
  std::size_t keep = 0;
  while (keep < order.size()) {
    cumulative += aggregates[order[keep]];
    ++keep;
    if (cumulative >= target) break;
  }
  order.resize(keep);
  return DimSet(dim, std::move(order));
}

/// Retrieves the top-k_extract records for a single-label query, averages
/// their values per dimension and keeps the dimensions carrying threshold%
/// of the aggregate magnitude.
inline DimSet extract_dims(const InvertedIndex& index, const SparseVector& query,
                           const ExclusionParams& params) {
  params.validate();
  const auto top = search(index, query, params.k_extract);
  if (top.hits.empty()) return DimSet(index.dim());
  std::vector<double> aggregate(index.dim(), 0.0);
  // The index is dimension-major, so walk postings against a rank table and
  // sum each dimension in rank order, independent of record order.
  constexpr std::size_t kNotRetrieved = static_cast<std::size_t>(-1);
  std::vector<std::size_t> rank(index.size(), kNotRetrieved);
  for (std::size_t r = 0; r < top.hits.size(); ++r) rank[*index.find(top.hits[r].id)] = r;
  std::vector<double> by_rank(top.hits.size());
  for (std::uint32_t dim = 0; dim < index.dim(); ++dim) {
    std::fill(by_rank.begin(), by_rank.end(), 0.0);
    bool any = false;
    for (const auto& p : index.postings(dim)) {
      if (rank[p.ordinal] != kNotRetrieved) {
        by_rank[rank[p.ordinal]] = double(p.value);
        any = true;
      }
    }
    if (any) {
      for (double v : by_rank) aggregate[dim] += v;
    }
  }
  for (double& a : aggregate) a /= double(top.hits.size());
  return select_magnitude_prefix(aggregate, params.threshold);
}

/// Scores records by the sum of their values over include \ exclude.
inline RankedList exclusion_search(const InvertedIndex& index, const DimSet& include,
                                   const DimSet& exclude, std::size_t k) {
  if (include.dim() != index.dim() || exclude.dim() != index.dim()) {
    throw Error("dimension set does not match index dim");
  }
  std::vector<std::uint32_t> remaining;
  std::set_difference(include.members().begin(), include.members().end(),
                      exclude.members().begin(), exclude.members().end(),
                      std::back_inserter(remaining));
  if (remaining.empty()) {
    RankedList out;
    out.cutoff = k;
    out.empty_dims = true;
    return out;
  }
  std::vector<double> acc(index.size(), 0.0);
  std::vector<std::size_t> touched;
  for (std::uint32_t dim : remaining) {
    for (const auto& p : index.postings(dim)) {
      if (acc[p.ordinal] == 0.0) touched.push_back(p.ordinal);
      acc[p.ordinal] += double(p.value);
    }
  }
  std::vector<detail::Scored> scored;
  scored.reserve(touched.size());
  for (std::size_t ord : touched) scored.push_back({ord, acc[ord]});
  return detail::take_top(std::move(scored), k,
                          [&](std::size_t ord) -> const std::string& { return index.id(ord); });
}

struct ExclusionResult {
  RankedList ranked;
  DimSet include_dims;
  DimSet exclude_dims;
};

/// Full "A but not B" procedure over already-encoded label query vectors.
inline ExclusionResult exclude_pipeline(const InvertedIndex& index, const SparseVector& include,
                                        const SparseVector& exclude,
                                        const ExclusionParams& params) {
  ExclusionResult r;
  r.include_dims = extract_dims(index, include, params);
  r.exclude_dims = extract_dims(index, exclude, params);
  r.ranked = exclusion_search(index, r.include_dims, r.exclude_dims, params.k_return);
  return r;
}

/// Sparse text-side query for a single label: encode the label's dense
/// embedding with the text branch and mask with top-t united with the
/// active dims of the label's pooled word embedding (top-t alone when every
/// token of the label is out of vocabulary).
template <std::floating_point Real>
SparseVector label_query_vector(std::string_view label, const SparseEmbeddingSet* words,
                                const BiEncoderModel<Real>& model,
                                const DenseEmbeddingSet& label_dense, std::size_t top_t,
                                double active_threshold) {
  auto ord = label_dense.find(label);
  if (!ord) throw Error("label '" + std::string(label) + "' missing from label embeddings");
  const auto latent = encode_modality(model.text, label_dense.row(*ord));
  std::optional<SparseVector> zw;
  if (words) {
    auto pooled = caption_embedding(label, *words);
    if (!pooled.all_oov) zw = std::move(pooled.embedding);
  }
  return sparsify(latent,
                  record_mask(latent, zw ? &*zw : nullptr, top_t, active_threshold));
}

// ---------------------------------------------------------------------------
// Dense baseline.

namespace detail {

template <class T>
double dense_norm(std::span<const T> v) {
  double s = 0.0;
  for (T x : v) s += double(x) * double(x);
  return std::sqrt(s);
}

}  // namespace detail

/// Top-K records by cosine similarity; zero-norm records are skipped.
inline RankedList dense_search(const DenseEmbeddingSet& set, std::span<const double> query,
                               std::size_t k) {
  if (query.size() != set.dim()) throw Error("query dim does not match dense set dim");
  const double qn = detail::dense_norm(query);
  if (qn == 0.0) throw Error("zero-norm query");
  std::vector<detail::Scored> scored;
  scored.reserve(set.size());
  for (std::size_t ord = 0; ord < set.size(); ++ord) {
    const auto row = set.row(ord);
    const double rn = detail::dense_norm(row);
    if (rn == 0.0) continue;
    double s = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) s += query[i] * double(row[i]);
    scored.push_back({ord, s / (qn * rn)});
  }
  return detail::take_top(std::move(scored), k,
                          [&](std::size_t ord) -> const std::string& { return set.id(ord); });
}

/// mean(vectors of ids_a) - mean(vectors of ids_b).
inline std::vector<double> avg_emb_query(const DenseEmbeddingSet& set,
                                         std::span<const std::string> ids_a,
                                         std::span<const std::string> ids_b) {
  if (ids_a.empty() || ids_b.empty()) throw Error("avg_emb_query: empty id list");
  auto mean = [&](std::span<const std::string> ids) {
    std::vector<double> m(set.dim(), 0.0);
    for (const auto& id : ids) {
      const auto row = set.at(id);
      for (std::size_t i = 0; i < m.size(); ++i) m[i] += double(row[i]);
    }
    for (double& v : m) v /= double(ids.size());
    return m;
  };
  auto q = mean(ids_a);
  const auto b = mean(ids_b);
  for (std::size_t i = 0; i < q.size(); ++i) q[i] -= b[i];
  return q;
}

/// Dense "A but not B" baseline: average the top-k_extract images retrieved
/// for each label's dense embedding, subtract, and rank by cosine.
inline RankedList avg_emb_exclude(const DenseEmbeddingSet& images,
                                  const DenseEmbeddingSet& label_dense, std::string_view include,
                                  std::string_view exclude, const ExclusionParams& params) {
  params.validate();
  auto label_vec = [&](std::string_view label) {
    auto ord = label_dense.find(label);
    if (!ord) throw Error("label '" + std::string(label) + "' missing from label embeddings");
    const auto row = label_dense.row(*ord);
    return std::vector<double>(row.begin(), row.end());
  };
  const auto ids_a = dense_search(images, label_vec(include), params.k_extract).ids();
  const auto ids_b = dense_search(images, label_vec(exclude), params.k_extract).ids();
  RankedList empty;
  empty.cutoff = params.k_return;
  if (ids_a.empty() || ids_b.empty()) return empty;
  const auto q = avg_emb_query(images, ids_a, ids_b);
  if (detail::dense_norm(std::span<const double>(q)) == 0.0) {
    empty.empty_dims = true;
    return empty;
  }
  return dense_search(images, q, params.k_return);
}

}  // namespace spdr
