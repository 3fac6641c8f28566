// Copyright (C) 2026 The spdr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>

#include "spdr/error.hpp"

namespace spdr {

namespace detail {

// Continued fraction for the incomplete beta function, evaluated with the
// modified Lentz method.
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw Error("incomplete beta continued fraction did not converge");
}

}  // namespace detail

/// Regularized incomplete beta function I_x(a, b) for a, b > 0, x in [0, 1].
inline double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw Error("incomplete_beta: a and b must be positive");
  if (!(x >= 0.0 && x <= 1.0)) throw Error("incomplete_beta: x outside [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  // The fraction converges fast for x < (a+1)/(a+b+2); use the symmetry
  // I_x(a,b) = 1 - I_{1-x}(b,a) on the other side.
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * detail::beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// Two-tailed p-value of Student's t with nu degrees of freedom.
inline double student_t_two_tailed(double t, double nu) {
  if (!(nu > 0.0)) throw Error("degrees of freedom must be positive");
  if (std::isinf(t)) return 0.0;
  return incomplete_beta(nu / 2.0, 0.5, nu / (nu + t * t));
}

struct TTestResult {
  double t_statistic = 0.0;
  std::size_t degrees_of_freedom = 0;
  std::optional<double> p_value;  // empty when degenerate
  bool significant = false;       // p < alpha
  bool degenerate = false;        // differences have zero variance
  double alpha = 0.01;
  double mean_difference = 0.0;
};

/// Two-tailed paired t-test on a_i - b_i.
inline TTestResult paired_t_test(std::span<const double> a, std::span<const double> b,
                                 double alpha = 0.01) {
  if (a.size() != b.size()) throw Error("paired_t_test: length mismatch");
  const std::size_t n = a.size();
  if (n < 2) throw Error("paired_t_test: need at least 2 pairs");
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= double(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dev = (a[i] - b[i]) - mean;
    ss += dev * dev;
  }
  TTestResult r;
  r.alpha = alpha;
  r.degrees_of_freedom = n - 1;
  r.mean_difference = mean;
  const double sd = std::sqrt(ss / double(n - 1));
  if (sd == 0.0) {
    r.degenerate = true;
    r.t_statistic = mean == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), mean);
    return r;
  }
  r.t_statistic = mean * std::sqrt(double(n)) / sd;
  r.p_value = student_t_two_tailed(r.t_statistic, double(n - 1));
  r.significant = *r.p_value < alpha;
  return r;
}

}  // namespace spdr
