// Copyright (C) 2026 The spdr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "spdr/embedding_set.hpp"
#include "spdr/error.hpp"

namespace spdr {

/// "include but not exclude" with its ground-truth image ids (sorted).
struct ExclusionQuery {
  std::string include;
  std::string exclude;
  std::vector<std::string> relevant;

  std::string id() const { return include + "|" + exclude; }

  friend bool operator==(const ExclusionQuery&, const ExclusionQuery&) = default;
};

/// All ordered label pairs (A, B), A != B, with at least min_co images
/// carrying both labels and at least min_excl carrying A but not B. Sorted
/// by (A, B).
inline std::vector<ExclusionQuery> build_exclusion_queries(std::span<const LabeledImage> images,
                                                           std::size_t min_co,
                                                           std::size_t min_excl) {
  if (min_co < 1 || min_excl < 1) throw UsageError("min_co and min_excl must be at least 1");
  std::map<std::string, std::set<std::string>> by_label;
  for (const auto& img : images) {
    for (const auto& label : img.labels) by_label[label].insert(img.image_id);
  }
  std::vector<ExclusionQuery> out;
  for (const auto& [a, with_a] : by_label) {
    for (const auto& [b, with_b] : by_label) {
      if (a == b) continue;
      std::size_t co = 0;
      std::vector<std::string> relevant;
      for (const auto& id : with_a) {
        if (with_b.count(id)) {
          ++co;
        } else {
          relevant.push_back(id);
        }
      }
      if (co >= min_co && relevant.size() >= min_excl) {
        out.push_back({a, b, std::move(relevant)});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Binary-relevance rank metrics. `ranked` must not contain duplicates.

using RelevantSet = std::unordered_set<std::string>;

inline double mrr_at_k(std::span<const std::string> ranked, const RelevantSet& relevant,
                       std::size_t k) {
  if (k < 1) throw Error("cutoff must be at least 1");
  const std::size_t n = std::min(k, ranked.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (relevant.count(ranked[i])) return 1.0 / double(i + 1);
  }
  return 0.0;
}

inline double ndcg_at_k(std::span<const std::string> ranked, const RelevantSet& relevant,
                        std::size_t k) {
  if (k < 1) throw Error("cutoff must be at least 1");
  if (relevant.empty()) throw Error("ndcg: empty relevant set");
  double dcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) {
    if (relevant.count(ranked[i])) dcg += 1.0 / std::log2(double(i + 2));
  }
  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, relevant.size()); ++i) {
    idcg += 1.0 / std::log2(double(i + 2));
  }
  return dcg / idcg;
}

/// Average precision normalized by min(|relevant|, k).
inline double ap_at_k(std::span<const std::string> ranked, const RelevantSet& relevant,
                      std::size_t k) {
  if (k < 1) throw Error("cutoff must be at least 1");
  if (relevant.empty()) throw Error("ap: empty relevant set");
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) {
    if (relevant.count(ranked[i])) {
      ++hits;
      sum += double(hits) / double(i + 1);
    }
  }
  return sum / double(std::min(relevant.size(), k));
}

// ---------------------------------------------------------------------------
// Run evaluation.

enum class MetricKind { mrr, ndcg, ap };

struct MetricSpec {
  MetricKind kind;
  std::size_t k;

  std::string name() const {
    const char* base = kind == MetricKind::mrr ? "MRR" : kind == MetricKind::ndcg ? "NDCG" : "AP";
    return std::string(base) + "@" + std::to_string(k);
  }

  double evaluate(std::span<const std::string> ranked, const RelevantSet& relevant) const {
    switch (kind) {
      case MetricKind::mrr: return mrr_at_k(ranked, relevant, k);
      case MetricKind::ndcg: return ndcg_at_k(ranked, relevant, k);
      case MetricKind::ap: return ap_at_k(ranked, relevant, k);
    }
    return 0.0;
  }
};

/// MRR@1, MRR@10, NDCG@10, AP@10 unless overridden.
inline std::vector<MetricSpec> default_metrics() {
  return {{MetricKind::mrr, 1}, {MetricKind::mrr, 10}, {MetricKind::ndcg, 10}, {MetricKind::ap, 10}};
}

struct QueryMetrics {
  std::string query_id;
  std::vector<double> values;  // one per metric, in report order
  bool missing = false;        // no ranked list was supplied
};

struct MetricReport {
  std::vector<MetricSpec> metrics;
  std::vector<QueryMetrics> queries;
  std::vector<double> means;
  std::size_t missing_count = 0;

  std::size_t query_count() const { return queries.size(); }

  std::size_t column_index(std::string_view name) const {
    for (std::size_t i = 0; i < metrics.size(); ++i) {
      if (metrics[i].name() == name) return i;
    }
    throw Error("no metric named " + std::string(name));
  }

  std::vector<double> column(std::string_view name) const {
    const std::size_t c = column_index(name);
    std::vector<double> out;
    for (const auto& q : queries) out.push_back(q.values[c]);
    return out;
  }

  double mean(std::string_view name) const { return means[column_index(name)]; }
};

/// Per-query ranked ids keyed by query id.
using RunMap = std::map<std::string, std::vector<std::string>>;

/// Scores every query; a query without a ranked list scores 0 everywhere.
inline MetricReport evaluate_run(const RunMap& run, std::span<const ExclusionQuery> queries,
                                 std::vector<MetricSpec> metrics = default_metrics()) {
  MetricReport report;
  report.metrics = std::move(metrics);
  report.means.assign(report.metrics.size(), 0.0);
  for (const auto& q : queries) {
    QueryMetrics row{q.id(), std::vector<double>(report.metrics.size(), 0.0), false};
    auto it = run.find(row.query_id);
    if (it == run.end()) {
      row.missing = true;
      ++report.missing_count;
    } else {
      const RelevantSet relevant(q.relevant.begin(), q.relevant.end());
      for (std::size_t m = 0; m < report.metrics.size(); ++m) {
        row.values[m] = report.metrics[m].evaluate(it->second, relevant);
      }
    }
    report.queries.push_back(std::move(row));
  }
  if (!report.queries.empty()) {
    for (std::size_t m = 0; m < report.metrics.size(); ++m) {
      double s = 0.0;
      for (const auto& q : report.queries) s += q.values[m];
      report.means[m] = s / double(report.queries.size());
    }
  }
  return report;
}

}  // namespace spdr
