// Copyright (C) 2026 The spdr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "spdr/error.hpp"
#include "spdr/rng.hpp"

namespace spdr {

/// y = W x + b with W stored row-major (out_dim x in_dim).
template <std::floating_point Real>
struct AffineMap {
  std::size_t out_dim = 0;
  std::size_t in_dim = 0;
  std::vector<Real> weight;
  std::vector<Real> bias;

  AffineMap() = default;
  AffineMap(std::size_t out, std::size_t in)
      : out_dim(out), in_dim(in), weight(out * in, Real(0)), bias(out, Real(0)) {}

  /// Weights uniform in [-1/sqrt(in), 1/sqrt(in)], zero bias.
  static AffineMap uniform_init(std::size_t out, std::size_t in, Rng& rng) {
    AffineMap map(out, in);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (auto& w : map.weight) w = static_cast<Real>(rng.uniform(-bound, bound));
    return map;
  }

  Real& w(std::size_t r, std::size_t c) { return weight[r * in_dim + c]; }
  Real w(std::size_t r, std::size_t c) const { return weight[r * in_dim + c]; }

  /// Evaluates in double; x may be float or double.
  template <class In>
  std::vector<double> apply(std::span<const In> x) const {
    if (x.size() != in_dim) {
      throw Error("input length " + std::to_string(x.size()) + ", expected " +
                  std::to_string(in_dim));
    }
    std::vector<double> y(out_dim);
    for (std::size_t r = 0; r < out_dim; ++r) {
      const Real* row = weight.data() + r * in_dim;
      double s = static_cast<double>(bias[r]);
      for (std::size_t c = 0; c < in_dim; ++c) s += double(row[c]) * double(x[c]);
      y[r] = s;
    }
    return y;
  }

  bool finite() const {
    for (Real v : weight) if (!std::isfinite(v)) return false;
    for (Real v : bias) if (!std::isfinite(v)) return false;
    return true;
  }

  template <std::floating_point Other>
  AffineMap<Other> cast() const {
    AffineMap<Other> out(out_dim, in_dim);
    for (std::size_t i = 0; i < weight.size(); ++i) out.weight[i] = static_cast<Other>(weight[i]);
    for (std::size_t i = 0; i < bias.size(); ++i) out.bias[i] = static_cast<Other>(bias[i]);
    return out;
  }

  friend bool operator==(const AffineMap&, const AffineMap&) = default;
};

/// Gradient buffers for one AffineMap, always accumulated in double.
struct AffineGrad {
  std::size_t out_dim = 0;
  std::size_t in_dim = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  AffineGrad() = default;
  AffineGrad(std::size_t out, std::size_t in)
      : out_dim(out), in_dim(in), weight(out * in, 0.0), bias(out, 0.0) {}

  /// weight += g x^T, bias += g
  template <class In>
  void accumulate(std::span<const double> g, std::span<const In> x) {
    for (std::size_t r = 0; r < out_dim; ++r) {
      if (g[r] == 0.0) continue;
      double* row = weight.data() + r * in_dim;
      for (std::size_t c = 0; c < in_dim; ++c) row[c] += g[r] * double(x[c]);
      bias[r] += g[r];
    }
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : weight) m = std::max(m, std::abs(v));
    for (double v : bias) m = std::max(m, std::abs(v));
    return m;
  }
};

/// W^T g for the backward pass through an AffineMap.
template <std::floating_point Real>
std::vector<double> transpose_apply(const AffineMap<Real>& map, std::span<const double> g) {
  std::vector<double> out(map.in_dim, 0.0);
  for (std::size_t r = 0; r < map.out_dim; ++r) {
    if (g[r] == 0.0) continue;
    const Real* row = map.weight.data() + r * map.in_dim;
    for (std::size_t c = 0; c < map.in_dim; ++c) out[c] += double(row[c]) * g[r];
  }
  return out;
}

template <std::floating_point Real>
void sgd_update(AffineMap<Real>& map, const AffineGrad& grad, double learning_rate) {
  for (std::size_t i = 0; i < map.weight.size(); ++i) {
    map.weight[i] = static_cast<Real>(double(map.weight[i]) - learning_rate * grad.weight[i]);
  }
  for (std::size_t i = 0; i < map.bias.size(); ++i) {
    map.bias[i] = static_cast<Real>(double(map.bias[i]) - learning_rate * grad.bias[i]);
  }
}

}  // namespace spdr
