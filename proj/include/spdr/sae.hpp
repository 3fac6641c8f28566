// Copyright (C) 2026 The spdr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Sparse autoencoder over pretrained word vectors. The encoder is an affine
// map followed by a ReLU capped at 1, so every latent lies in [0, 1]; the
// decoder is affine. Training minimizes the unweighted sum of
//
//   RL  = mean_i ||decode(z_i) - w_i||^2
//   ASL = sum_h max(0, rho_h - rho*)^2,  rho_h = mean_i z_ih over the batch
//   PSL = mean_i sum_h z_ih (1 - z_ih)
//
// with plain mini-batch SGD.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "spdr/affine.hpp"
#include "spdr/embedding_set.hpp"
#include "spdr/error.hpp"
#include "spdr/rng.hpp"
#include "spdr/sparse_vector.hpp"

namespace spdr {

template <std::floating_point Real = float>
struct SaeModel {
  AffineMap<Real> encoder;  // d x m
  AffineMap<Real> decoder;  // m x d

  std::size_t input_dim() const { return encoder.in_dim; }
  std::size_t latent_dim() const { return encoder.out_dim; }

  bool finite() const { return encoder.finite() && decoder.finite(); }

  template <std::floating_point Other>
  SaeModel<Other> cast() const {
    return {encoder.template cast<Other>(), decoder.template cast<Other>()};
  }

  friend bool operator==(const SaeModel&, const SaeModel&) = default;
};

struct SaeTrainConfig {
  std::size_t latent_dim = 1000;
  double target_sparsity = 0.15;
  double learning_rate = 0.05;
  int epochs = 30;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;

  void validate() const {
    if (latent_dim == 0) throw UsageError("sae.latent_dim must be positive");
    if (!(target_sparsity > 0.0 && target_sparsity < 1.0)) {
      throw UsageError("sae.target_sparsity must lie in (0,1)");
    }
    if (!(learning_rate > 0.0)) throw UsageError("sae.learning_rate must be positive");
    if (epochs <= 0) throw UsageError("sae.epochs must be positive");
    if (batch_size == 0) throw UsageError("sae.batch_size must be positive");
  }
};

struct LossBreakdown {
  double rl = 0.0;
  double asl = 0.0;
  double psl = 0.0;
  double total = 0.0;
};

template <std::floating_point Real = float>
SaeModel<Real> sae_init(std::size_t input_dim, std::size_t latent_dim, std::uint64_t seed) {
  if (input_dim == 0 || latent_dim == 0) throw Error("sae dims must be positive");
  Rng rng(seed);
  SaeModel<Real> model;
  model.encoder = AffineMap<Real>::uniform_init(latent_dim, input_dim, rng);
  model.decoder = AffineMap<Real>::uniform_init(input_dim, latent_dim, rng);
  return model;
}

inline double capped_relu(double x) { return std::clamp(x, 0.0, 1.0); }

/// Dense latent z = clamp(W_enc w + b_enc, 0, 1).
template <std::floating_point Real, class In>
std::vector<double> sae_encode_dense(const SaeModel<Real>& model, std::span<const In> w) {
  auto z = model.encoder.apply(w);
  for (double& v : z) v = capped_relu(v);
  return z;
}

template <std::floating_point Real, class In>
SparseVector sae_encode(const SaeModel<Real>& model, std::span<const In> w) {
  auto z = sae_encode_dense(model, w);
  return SparseVector::from_dense(std::span<const double>(z));
}

template <std::floating_point Real>
std::vector<double> sae_decode(const SaeModel<Real>& model, const SparseVector& z) {
  if (z.dim() != model.latent_dim()) {
    throw Error("latent dim " + std::to_string(z.dim()) + ", expected " +
                std::to_string(model.latent_dim()));
  }
  const auto& dec = model.decoder;
  std::vector<double> out(dec.out_dim);
  for (std::size_t r = 0; r < dec.out_dim; ++r) out[r] = double(dec.bias[r]);
  for (const auto& e : z.entries()) {
    for (std::size_t r = 0; r < dec.out_dim; ++r) {
      out[r] += double(dec.w(r, e.index)) * double(e.value);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Losses. Batches are lists of equal-length vectors.

inline double loss_rl(std::span<const std::vector<double>> inputs,
                      std::span<const std::vector<double>> reconstructions) {
  if (inputs.empty()) throw Error("loss_rl: empty batch");
  if (inputs.size() != reconstructions.size()) throw Error("loss_rl: batch size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].size() != reconstructions[i].size()) {
      throw Error("loss_rl: vector length mismatch at item " + std::to_string(i));
    }
    for (std::size_t j = 0; j < inputs[i].size(); ++j) {
      const double diff = reconstructions[i][j] - inputs[i][j];
      s += diff * diff;
    }
  }
  return s / double(inputs.size());
}

/// Per-dimension batch mean activation rho_h.
inline std::vector<double> mean_activation(std::span<const std::vector<double>> latents) {
  if (latents.empty()) throw Error("empty batch");
  std::vector<double> rho(latents.front().size(), 0.0);
  for (const auto& z : latents) {
    if (z.size() != rho.size()) throw Error("latent length mismatch");
    for (std::size_t h = 0; h < z.size(); ++h) rho[h] += z[h];
  }
  for (double& r : rho) r /= double(latents.size());
  return rho;
}

inline double loss_asl(std::span<const std::vector<double>> latents, double target) {
  if (latents.empty()) throw Error("loss_asl: empty batch");
  double s = 0.0;
  for (double rho : mean_activation(latents)) {
    const double excess = std::max(0.0, rho - target);
    s += excess * excess;
  }
  return s;
}

inline double loss_psl(std::span<const std::vector<double>> latents) {
  if (latents.empty()) throw Error("loss_psl: empty batch");
  double s = 0.0;
  for (const auto& z : latents) {
    for (double v : z) {
      if (!(v >= 0.0 && v <= 1.0)) throw Error("loss_psl: latent value outside [0,1]");
      s += v * (1.0 - v);
    }
  }
  return s / double(latents.size());
}

// ---------------------------------------------------------------------------
// Gradients.

struct SaeGradient {
  AffineGrad encoder;
  AffineGrad decoder;
  LossBreakdown loss;
};

namespace detail {

template <std::floating_point Real, class In>
struct SaeForward {
  std::vector<std::vector<double>> pre;     // encoder pre-activations
  std::vector<std::vector<double>> latent;  // capped ReLU outputs
  std::vector<std::vector<double>> recon;
  std::vector<std::vector<double>> input;
  LossBreakdown loss;
};

template <std::floating_point Real, class In>
SaeForward<Real, In> sae_forward(const SaeModel<Real>& model,
                                 std::span<const std::span<const In>> batch,
                                 double target) {
  if (batch.empty()) throw Error("sae: empty batch");
  SaeForward<Real, In> f;
  f.pre.reserve(batch.size());
  for (const auto& w : batch) {
    auto a = model.encoder.apply(w);
    std::vector<double> z(a.size());
    for (std::size_t h = 0; h < a.size(); ++h) z[h] = capped_relu(a[h]);
    f.recon.push_back(model.decoder.apply(std::span<const double>(z)));
    f.input.emplace_back(w.begin(), w.end());
    f.pre.push_back(std::move(a));
    f.latent.push_back(std::move(z));
  }
  f.loss.rl = loss_rl(f.input, f.recon);
  if (!std::isfinite(f.loss.rl)) throw Error("non-finite reconstruction loss (RL)");
  f.loss.asl = loss_asl(f.latent, target);
  if (!std::isfinite(f.loss.asl)) throw Error("non-finite average sparsity loss (ASL)");
  for (const auto& z : f.latent) {
    for (double v : z) {
      if (std::isnan(v)) throw Error("non-finite partial sparsity loss (PSL)");
    }
  }
  f.loss.psl = loss_psl(f.latent);
  f.loss.total = f.loss.rl + f.loss.asl + f.loss.psl;
  return f;
}

}  // namespace detail

/// Total loss of the model on a batch, without gradients.
template <std::floating_point Real, class In>
LossBreakdown sae_loss(const SaeModel<Real>& model, std::span<const std::span<const In>> batch,
                       double target) {
  return detail::sae_forward(model, batch, target).loss;
}

/// Analytic gradient of RL + ASL + PSL. The clamp subgradient is 1 strictly
/// inside (0,1) and 0 elsewhere, including both boundary points.
template <std::floating_point Real, class In>
SaeGradient sae_grad(const SaeModel<Real>& model, std::span<const std::span<const In>> batch,
                     double target) {
  auto f = detail::sae_forward(model, batch, target);
  const std::size_t n = batch.size();
  const std::size_t d = model.latent_dim();
  const double inv_n = 1.0 / double(n);

  const auto rho = mean_activation(f.latent);
  std::vector<double> asl_grad(d);
  for (std::size_t h = 0; h < d; ++h) {
    asl_grad[h] = 2.0 * std::max(0.0, rho[h] - target) * inv_n;
  }

  SaeGradient g{AffineGrad(d, model.input_dim()), AffineGrad(model.input_dim(), d), f.loss};
  std::vector<double> g_recon(model.input_dim());
  std::vector<double> g_pre(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < g_recon.size(); ++j) {
      g_recon[j] = 2.0 * (f.recon[i][j] - f.input[i][j]) * inv_n;
    }
    g.decoder.accumulate(std::span<const double>(g_recon), std::span<const double>(f.latent[i]));
    auto g_latent = transpose_apply(model.decoder, g_recon);
    for (std::size_t h = 0; h < d; ++h) {
      const double a = f.pre[i][h];
      if (a > 0.0 && a < 1.0) {
        const double z = f.latent[i][h];
        g_pre[h] = g_latent[h] + asl_grad[h] + (1.0 - 2.0 * z) * inv_n;
      } else {
        g_pre[h] = 0.0;
      }
    }
    g.encoder.accumulate(std::span<const double>(g_pre), batch[i]);
  }
  return g;
}

struct SaeEpochTrace {
  int epoch = 0;
  LossBreakdown loss;
};

template <std::floating_point Real = float>
struct SaeTrainResult {
  SaeModel<Real> model;
  std::vector<SaeEpochTrace> trace;
};

/// Mini-batch SGD over the table; epoch order shuffled from config.seed.
/// The epoch loss is the batch-size weighted mean of the batch losses.
template <std::floating_point Real = float>
SaeTrainResult<Real> sae_train(const WordEmbeddingTable& table, const SaeTrainConfig& config) {
  config.validate();
  if (table.size() < config.batch_size) {
    throw Error("batch_size " + std::to_string(config.batch_size) + " exceeds table size " +
                std::to_string(table.size()));
  }
  SaeTrainResult<Real> result{sae_init<Real>(table.dim(), config.latent_dim, config.seed), {}};
  Rng rng(config.seed, /*stream=*/1);
  std::vector<std::size_t> order(table.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<std::span<const float>> batch;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    LossBreakdown acc;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(table.row(order[i]));
      SaeGradient g;
      try {
        g = sae_grad(result.model, std::span<const std::span<const float>>(batch),
                     config.target_sparsity);
      } catch (const Error& e) {
        throw Error("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
      const double w = double(end - start);
      acc.rl += w * g.loss.rl;
      acc.asl += w * g.loss.asl;
      acc.psl += w * g.loss.psl;
      sgd_update(result.model.encoder, g.encoder, config.learning_rate);
      sgd_update(result.model.decoder, g.decoder, config.learning_rate);
    }
    const double n = double(order.size());
    acc.rl /= n;
    acc.asl /= n;
    acc.psl /= n;
    acc.total = acc.rl + acc.asl + acc.psl;
    if (!std::isfinite(acc.total) || !result.model.finite()) {
      throw Error("training diverged at epoch " + std::to_string(epoch));
    }
    result.trace.push_back({epoch, acc});
  }
  return result;
}

/// One record per token of the table, encoded with the trained model.
template <std::floating_point Real>
SparseEmbeddingSet export_word_sparse(const SaeModel<Real>& model,
                                      const WordEmbeddingTable& table) {
  if (table.dim() != model.input_dim()) {
    throw Error("word table dim " + std::to_string(table.dim()) + " does not match model input " +
                std::to_string(model.input_dim()));
  }
  SparseEmbeddingSet out(static_cast<std::uint32_t>(model.latent_dim()));
  out.reserve(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    out.add(table.token(i), sae_encode(model, table.row(i)));
  }
  return out;
}

}  // namespace spdr
