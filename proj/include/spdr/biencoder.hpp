// Copyright (C) 2026 The spdr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Paired image/text encoder-decoders over dense k-dimensional embeddings.
//
// Each branch encodes E_k into a non-negative latent E_d = ReLU(W E_k + b)
// (d > k) and decodes it back with an affine map. A per-record mask keeps
// the top-t latent dimensions plus the dimensions that are active in the
// caption embedding z_c; the sparse representation is SR = mask * E_d.
//
// Training loss: L = RL + lambda * CL, where RL is the paired reconstruction
// error and CL the symmetric cross entropy over S_ij = cos(SR_img_i,
// SR_text_j) / tau. Masks are recomputed on every forward pass and held
// constant in the backward pass.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <iterator>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "spdr/affine.hpp"
#include "spdr/embedding_set.hpp"
#include "spdr/error.hpp"
#include "spdr/rng.hpp"
#include "spdr/sparse_vector.hpp"

namespace spdr {

enum class ReconPairing { cross, same };
enum class ContrastiveOn { sr, latent };
enum class Modality { image, text };

template <std::floating_point Real = float>
struct BiEncoderBranch {
  AffineMap<Real> encoder;  // d x k
  AffineMap<Real> decoder;  // k x d

  bool finite() const { return encoder.finite() && decoder.finite(); }
  friend bool operator==(const BiEncoderBranch&, const BiEncoderBranch&) = default;
};

template <std::floating_point Real = float>
struct BiEncoderModel {
  BiEncoderBranch<Real> image;
  BiEncoderBranch<Real> text;

  std::size_t input_dim() const { return image.encoder.in_dim; }
  std::size_t latent_dim() const { return image.encoder.out_dim; }
  bool finite() const { return image.finite() && text.finite(); }

  const BiEncoderBranch<Real>& branch(Modality m) const {
    return m == Modality::image ? image : text;
  }

  template <std::floating_point Other>
  BiEncoderModel<Other> cast() const {
    return {{image.encoder.template cast<Other>(), image.decoder.template cast<Other>()},
            {text.encoder.template cast<Other>(), text.decoder.template cast<Other>()}};
  }

  friend bool operator==(const BiEncoderModel&, const BiEncoderModel&) = default;
};

struct BiTrainConfig {
  std::size_t latent_dim = 1000;
  std::size_t top_t = 64;
  double active_threshold = 0.1;
  double lambda = 1.0;
  double temperature = 0.07;
  double learning_rate = 0.05;
  int epochs = 50;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  ReconPairing pairing = ReconPairing::cross;
  ContrastiveOn contrastive_on = ContrastiveOn::sr;

  void validate() const {
    if (top_t == 0 || top_t > latent_dim) throw UsageError("bi.top_t must lie in [1, d]");
    if (!(active_threshold > 0.0 && active_threshold < 1.0)) {
      throw UsageError("bi.active_threshold must lie in (0,1)");
    }
    if (!(lambda >= 0.0)) throw UsageError("bi.lambda must be non-negative");
    if (!(temperature > 0.0)) throw UsageError("bi.temperature must be positive");
    if (!(learning_rate > 0.0)) throw UsageError("bi.learning_rate must be positive");
    if (epochs <= 0) throw UsageError("bi.epochs must be positive");
    if (batch_size < 2) throw UsageError("bi.batch_size must be at least 2");
  }
};

template <std::floating_point Real = float>
BiEncoderModel<Real> bi_init(std::size_t input_dim, std::size_t latent_dim, std::uint64_t seed) {
  if (input_dim == 0) throw Error("k must be positive");
  if (latent_dim <= input_dim) throw Error("d must exceed k");
  BiEncoderModel<Real> model;
  Rng image_rng(seed, 10);
  Rng text_rng(seed, 11);
  model.image.encoder = AffineMap<Real>::uniform_init(latent_dim, input_dim, image_rng);
  model.image.decoder = AffineMap<Real>::uniform_init(input_dim, latent_dim, image_rng);
  model.text.encoder = AffineMap<Real>::uniform_init(latent_dim, input_dim, text_rng);
  model.text.decoder = AffineMap<Real>::uniform_init(input_dim, latent_dim, text_rng);
  return model;
}

/// E_d = ReLU(W_enc E_k + b_enc).
template <std::floating_point Real, class In>
std::vector<double> encode_modality(const BiEncoderBranch<Real>& branch,
                                    std::span<const In> input) {
  auto latent = branch.encoder.apply(input);
  for (double& v : latent) v = std::max(0.0, v);
  return latent;
}

template <std::floating_point Real>
std::vector<double> decode_modality(const BiEncoderBranch<Real>& branch,
                                    std::span<const double> latent) {
  return branch.decoder.apply(latent);
}

// ---------------------------------------------------------------------------
// Masks.

/// Sorted set of latent indices in [0, dim).
class IndexMask {
 public:
  IndexMask() = default;
  explicit IndexMask(std::uint32_t dim) : dim_(dim) {}
  IndexMask(std::uint32_t dim, std::vector<std::uint32_t> members)
      : dim_(dim), members_(std::move(members)) {
    std::sort(members_.begin(), members_.end());
    members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
    if (!members_.empty() && members_.back() >= dim_) throw Error("mask index out of range");
  }

  std::uint32_t dim() const { return dim_; }
  std::span<const std::uint32_t> members() const { return members_; }
  std::size_t size() const { return members_.size(); }
  bool empty() const { return members_.empty(); }
  bool contains(std::uint32_t i) const {
    return std::binary_search(members_.begin(), members_.end(), i);
  }

  friend bool operator==(const IndexMask&, const IndexMask&) = default;

 private:
  std::uint32_t dim_ = 0;
  std::vector<std::uint32_t> members_;
};

/// Indices of the t largest positive values; ties go to the lower index.
inline IndexMask topt_mask(std::span<const double> latent, std::size_t t) {
  std::vector<std::uint32_t> candidates;
  for (std::size_t i = 0; i < latent.size(); ++i) {
    if (latent[i] > 0.0) candidates.push_back(static_cast<std::uint32_t>(i));
  }
  auto by_value = [&](std::uint32_t a, std::uint32_t b) {
    return latent[a] != latent[b] ? latent[a] > latent[b] : a < b;
  };
  if (candidates.size() > t) {
    std::nth_element(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(t),
                     candidates.end(), by_value);
    candidates.resize(t);
  }
  return IndexMask(static_cast<std::uint32_t>(latent.size()), std::move(candidates));
}

/// Dimensions of z_c with value >= threshold.
inline IndexMask active_mask(const SparseVector& caption, double threshold) {
  std::vector<std::uint32_t> members;
  for (const auto& e : caption.entries()) {
    if (double(e.value) >= threshold) members.push_back(e.index);
  }
  return IndexMask(caption.dim(), std::move(members));
}

inline IndexMask union_mask(const IndexMask& a, const IndexMask& b) {
  if (a.dim() != b.dim()) throw Error("mask dim mismatch");
  std::vector<std::uint32_t> members;
  std::set_union(a.members().begin(), a.members().end(), b.members().begin(),
                 b.members().end(), std::back_inserter(members));
  return IndexMask(a.dim(), std::move(members));
}

/// Keeps latent values on the mask; zero entries are dropped.
inline SparseVector sparsify(std::span<const double> latent, const IndexMask& mask) {
  if (latent.size() != mask.dim()) throw Error("sparsify: dim mismatch");
  std::vector<SparseEntry> entries;
  for (std::uint32_t i : mask.members()) {
    const float v = static_cast<float>(latent[i]);
    if (v > 0.0f) entries.push_back({i, v});
  }
  return SparseVector(mask.dim(), std::move(entries));
}

/// top_t(E_d) united with active(z_c) when a caption embedding is supplied.
inline IndexMask record_mask(std::span<const double> latent, const SparseVector* caption,
                             std::size_t top_t, double active_threshold) {
  IndexMask mask = topt_mask(latent, top_t);
  if (caption) {
    if (caption->dim() != latent.size()) throw Error("caption embedding dim mismatch");
    mask = union_mask(mask, active_mask(*caption, active_threshold));
  }
  return mask;
}

// ---------------------------------------------------------------------------
// Losses.

/// Reconstruction error of one pair. `cross` compares the image target with
/// the text reconstruction and vice versa; `same` compares each modality with
/// its own reconstruction.
inline double loss_recon_pair(std::span<const double> image, std::span<const double> text,
                              std::span<const double> image_hat,
                              std::span<const double> text_hat, ReconPairing pairing) {
  const std::size_t k = image.size();
  if (text.size() != k || image_hat.size() != k || text_hat.size() != k) {
    throw Error("loss_recon_pair: length mismatch");
  }
  auto sq = [](std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
  };
  return pairing == ReconPairing::cross ? sq(image, text_hat) + sq(text, image_hat)
                                        : sq(image, image_hat) + sq(text, text_hat);
}

namespace detail {

inline double norm2(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

inline double cosine(std::span<const double> x, double nx, std::span<const double> y,
                     double ny) {
  if (nx == 0.0 || ny == 0.0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s / (nx * ny);
}

inline double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

struct ContrastiveResult {
  double loss = 0.0;
  std::vector<std::vector<double>> grad_image;  // dCL/dx_i
  std::vector<std::vector<double>> grad_text;   // dCL/dy_j
};

inline ContrastiveResult contrastive(std::span<const std::vector<double>> image,
                                     std::span<const std::vector<double>> text,
                                     double temperature, bool with_grad) {
  const std::size_t n = image.size();
  if (n < 2) throw Error("contrastive loss needs N >= 2 pairs");
  if (text.size() != n) throw Error("contrastive loss: batch size mismatch");
  if (!(temperature > 0.0)) throw Error("contrastive loss: temperature must be positive");
  std::vector<double> nx(n), ny(n);
  for (std::size_t i = 0; i < n; ++i) {
    nx[i] = norm2(image[i]);
    ny[i] = norm2(text[i]);
  }
  std::vector<double> cos(n * n), s(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (image[i].size() != text[j].size()) throw Error("contrastive loss: dim mismatch");
      cos[i * n + j] = cosine(image[i], nx[i], text[j], ny[j]);
      s[i * n + j] = cos[i * n + j] / temperature;
    }
  }
  std::vector<double> row_lse(n), col_lse(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) buf[j] = s[i * n + j];
    row_lse[i] = log_sum_exp(buf);
    for (std::size_t j = 0; j < n; ++j) buf[j] = s[j * n + i];
    col_lse[i] = log_sum_exp(buf);
  }
  ContrastiveResult r;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += (s[i * n + i] - row_lse[i]) + (s[i * n + i] - col_lse[i]);
  r.loss = -acc / (2.0 * double(n));
  if (!with_grad) return r;

  r.grad_image.assign(n, std::vector<double>(image[0].size(), 0.0));
  r.grad_text.assign(n, std::vector<double>(text[0].size(), 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double p = std::exp(s[i * n + j] - row_lse[i]);
      const double q = std::exp(s[i * n + j] - col_lse[j]);
      const double g_s = (p + q - (i == j ? 2.0 : 0.0)) / (2.0 * double(n));
      const double g_cos = g_s / temperature;
      if (g_cos == 0.0 || nx[i] == 0.0 || ny[j] == 0.0) continue;
      const double c = cos[i * n + j];
      const double inv = 1.0 / (nx[i] * ny[j]);
      auto& gx = r.grad_image[i];
      auto& gy = r.grad_text[j];
      for (std::size_t h = 0; h < gx.size(); ++h) {
        gx[h] += g_cos * (text[j][h] * inv - c * image[i][h] / (nx[i] * nx[i]));
        gy[h] += g_cos * (image[i][h] * inv - c * text[j][h] / (ny[j] * ny[j]));
      }
    }
  }
  return r;
}

}  // namespace detail

/// Symmetric contrastive loss over aligned dense batches. The cosine of an
/// all-zero vector with anything is 0.
inline double loss_contrastive(std::span<const std::vector<double>> image,
                               std::span<const std::vector<double>> text, double temperature) {
  return detail::contrastive(image, text, temperature, false).loss;
}

inline double loss_contrastive(std::span<const SparseVector> image,
                               std::span<const SparseVector> text, double temperature) {
  std::vector<std::vector<double>> x, y;
  for (const auto& v : image) x.push_back(v.to_dense<double>());
  for (const auto& v : text) y.push_back(v.to_dense<double>());
  return loss_contrastive(x, y, temperature);
}

// ---------------------------------------------------------------------------
// Training.

/// One training pair: dense image and text embeddings plus the caption's
/// sparse embedding (null when none is available).
struct PairView {
  std::span<const float> image;
  std::span<const float> text;
  const SparseVector* caption = nullptr;
};

struct BiMasks {
  std::vector<IndexMask> image;
  std::vector<IndexMask> text;
};

struct BiLoss {
  double rl = 0.0;
  double cl = 0.0;
  double total = 0.0;
};

struct BiGradient {
  AffineGrad image_encoder, image_decoder, text_encoder, text_decoder;
  BiLoss loss;
  BiMasks masks;
};

namespace detail {

template <std::floating_point Real>
struct BiForward {
  std::vector<std::vector<double>> pre_image, pre_text;  // encoder pre-activations
  std::vector<std::vector<double>> lat_image, lat_text;  // E_d
  std::vector<std::vector<double>> rec_image, rec_text;  // reconstructions
  std::vector<std::vector<double>> in_image, in_text;    // E_k
  std::vector<std::vector<double>> con_image, con_text;  // contrastive inputs
  BiMasks masks;
  BiLoss loss;
};

inline std::vector<double> apply_mask(std::span<const double> v, const IndexMask& mask) {
  std::vector<double> out(v.size(), 0.0);
  for (std::uint32_t i : mask.members()) out[i] = v[i];
  return out;
}

template <std::floating_point Real>
BiForward<Real> bi_forward(const BiEncoderModel<Real>& model, std::span<const PairView> batch,
                           const BiTrainConfig& config, const BiMasks* frozen) {
  if (batch.empty()) throw Error("biencoder: empty batch");
  const std::size_t n = batch.size();
  if (frozen && (frozen->image.size() != n || frozen->text.size() != n)) {
    throw Error("biencoder: frozen mask count mismatch");
  }
  BiForward<Real> f;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = batch[i];
    auto pre_i = model.image.encoder.apply(p.image);
    auto pre_t = model.text.encoder.apply(p.text);
    std::vector<double> li(pre_i.size()), lt(pre_t.size());
    for (std::size_t h = 0; h < li.size(); ++h) li[h] = std::max(0.0, pre_i[h]);
    for (std::size_t h = 0; h < lt.size(); ++h) lt[h] = std::max(0.0, pre_t[h]);
    IndexMask mi = frozen ? frozen->image[i]
                          : record_mask(li, p.caption, config.top_t, config.active_threshold);
    IndexMask mt = frozen ? frozen->text[i]
                          : record_mask(lt, p.caption, config.top_t, config.active_threshold);
    if (config.contrastive_on == ContrastiveOn::sr) {
      f.con_image.push_back(apply_mask(li, mi));
      f.con_text.push_back(apply_mask(lt, mt));
    } else {
      f.con_image.push_back(li);
      f.con_text.push_back(lt);
    }
    f.rec_image.push_back(model.image.decoder.apply(std::span<const double>(li)));
    f.rec_text.push_back(model.text.decoder.apply(std::span<const double>(lt)));
    f.in_image.emplace_back(p.image.begin(), p.image.end());
    f.in_text.emplace_back(p.text.begin(), p.text.end());
    f.pre_image.push_back(std::move(pre_i));
    f.pre_text.push_back(std::move(pre_t));
    f.lat_image.push_back(std::move(li));
    f.lat_text.push_back(std::move(lt));
    f.masks.image.push_back(std::move(mi));
    f.masks.text.push_back(std::move(mt));
  }
  double rl = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    rl += loss_recon_pair(f.in_image[i], f.in_text[i], f.rec_image[i], f.rec_text[i],
                          config.pairing);
  }
  f.loss.rl = rl / double(n);
  f.loss.cl = loss_contrastive(f.con_image, f.con_text, config.temperature);
  f.loss.total = f.loss.rl + config.lambda * f.loss.cl;
  if (!std::isfinite(f.loss.rl)) throw Error("non-finite reconstruction loss (RL)");
  if (!std::isfinite(f.loss.cl)) throw Error("non-finite contrastive loss (CL)");
  return f;
}

}  // namespace detail

/// Loss of the model on a batch; masks recomputed unless `frozen` is given.
template <std::floating_point Real>
BiLoss bi_loss(const BiEncoderModel<Real>& model, std::span<const PairView> batch,
               const BiTrainConfig& config, const BiMasks* frozen = nullptr) {
  return detail::bi_forward(model, batch, config, frozen).loss;
}

/// Analytic gradient of RL + lambda * CL. Gradients flow through latent
/// values on the mask only; mask selection itself is not differentiated.
/// The ReLU subgradient at 0 is 0.
template <std::floating_point Real>
BiGradient bi_grad(const BiEncoderModel<Real>& model, std::span<const PairView> batch,
                   const BiTrainConfig& config, const BiMasks* frozen = nullptr) {
  auto f = detail::bi_forward(model, batch, config, frozen);
  const std::size_t n = batch.size();
  const std::size_t k = model.input_dim();
  const std::size_t d = model.latent_dim();
  BiGradient g{AffineGrad(d, k), AffineGrad(k, d), AffineGrad(d, k), AffineGrad(k, d),
               f.loss, {}};

  detail::ContrastiveResult cl;
  if (config.lambda != 0.0) {
    cl = detail::contrastive(f.con_image, f.con_text, config.temperature, true);
  }
  const double inv_n = 1.0 / double(n);
  std::vector<double> g_rec_image(k), g_rec_text(k), g_pre(d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& target_for_image = config.pairing == ReconPairing::cross ? f.in_text[i]
                                                                        : f.in_image[i];
    const auto& target_for_text = config.pairing == ReconPairing::cross ? f.in_image[i]
                                                                       : f.in_text[i];
    for (std::size_t j = 0; j < k; ++j) {
      g_rec_image[j] = 2.0 * (f.rec_image[i][j] - target_for_image[j]) * inv_n;
      g_rec_text[j] = 2.0 * (f.rec_text[i][j] - target_for_text[j]) * inv_n;
    }
    g.image_decoder.accumulate(std::span<const double>(g_rec_image),
                               std::span<const double>(f.lat_image[i]));
    g.text_decoder.accumulate(std::span<const double>(g_rec_text),
                              std::span<const double>(f.lat_text[i]));

    auto backprop = [&](const AffineMap<Real>& decoder, std::span<const double> g_rec,
                        const std::vector<double>& pre, const IndexMask& mask,
                        const std::vector<double>* g_con, AffineGrad& enc_grad,
                        std::span<const double> input) {
      auto g_lat = transpose_apply(decoder, g_rec);
      if (g_con) {
        if (config.contrastive_on == ContrastiveOn::sr) {
          for (std::uint32_t h : mask.members()) g_lat[h] += config.lambda * (*g_con)[h];
        } else {
          for (std::size_t h = 0; h < d; ++h) g_lat[h] += config.lambda * (*g_con)[h];
        }
      }
      for (std::size_t h = 0; h < d; ++h) g_pre[h] = pre[h] > 0.0 ? g_lat[h] : 0.0;
      enc_grad.accumulate(std::span<const double>(g_pre), input);
    };
    backprop(model.image.decoder, g_rec_image, f.pre_image[i], f.masks.image[i],
             config.lambda != 0.0 ? &cl.grad_image[i] : nullptr, g.image_encoder,
             std::span<const double>(f.in_image[i]));
    backprop(model.text.decoder, g_rec_text, f.pre_text[i], f.masks.text[i],
             config.lambda != 0.0 ? &cl.grad_text[i] : nullptr, g.text_encoder,
             std::span<const double>(f.in_text[i]));
  }
  g.masks = std::move(f.masks);
  return g;
}

template <std::floating_point Real>
void apply_gradient(BiEncoderModel<Real>& model, const BiGradient& g, double learning_rate) {
  sgd_update(model.image.encoder, g.image_encoder, learning_rate);
  sgd_update(model.image.decoder, g.image_decoder, learning_rate);
  sgd_update(model.text.encoder, g.text_encoder, learning_rate);
  sgd_update(model.text.decoder, g.text_decoder, learning_rate);
}

/// One SGD step; returns the updated model and the pre-update loss.
template <std::floating_point Real>
std::pair<BiEncoderModel<Real>, BiLoss> bi_train_step(BiEncoderModel<Real> model,
                                                      std::span<const PairView> batch,
                                                      const BiTrainConfig& config) {
  auto g = bi_grad(model, batch, config);
  apply_gradient(model, g, config.learning_rate);
  if (!model.finite()) throw Error("non-finite parameters after update");
  return {std::move(model), g.loss};
}

struct BiEpochTrace {
  int epoch = 0;
  BiLoss loss;
};

template <std::floating_point Real = float>
struct BiTrainResult {
  BiEncoderModel<Real> model;
  std::vector<BiEpochTrace> trace;
};

/// Resolves training pairs from caption records: the image vector is keyed
/// by image_id, the text vector and z_c by "imageid#captionindex".
inline std::vector<PairView> resolve_pairs(const DenseEmbeddingSet& images,
                                           const DenseEmbeddingSet& texts,
                                           const SparseEmbeddingSet& captions_zc,
                                           std::span<const CaptionRecord> captions) {
  std::vector<PairView> pairs;
  std::vector<std::string> missing;
  std::size_t missing_total = 0;
  std::unordered_map<std::string, std::size_t> next_index;
  auto note = [&](std::string what) {
    if (missing.size() < 10) missing.push_back(std::move(what));
    ++missing_total;
  };
  for (const auto& rec : captions) {
    const std::string key = caption_key(rec.image_id, next_index[rec.image_id]++);
    auto img = images.find(rec.image_id);
    auto txt = texts.find(key);
    const SparseVector* zc = captions_zc.lookup(key);
    if (!img) note("image '" + rec.image_id + "'");
    if (!txt) note("text '" + key + "'");
    if (!zc) note("caption embedding '" + key + "'");
    if (img && txt && zc) pairs.push_back({images.row(*img), texts.row(*txt), zc});
  }
  if (missing_total > 0) {
    std::string msg = "unmatched ids (" + std::to_string(missing_total) + "): ";
    for (std::size_t i = 0; i < missing.size(); ++i) msg += (i ? ", " : "") + missing[i];
    throw Error(msg);
  }
  return pairs;
}

/// Epoch-shuffled mini-batch SGD. A trailing batch of one pair is merged
/// into the previous batch since the contrastive term needs two pairs.
template <std::floating_point Real = float>
BiTrainResult<Real> bi_train(std::span<const PairView> pairs, const BiTrainConfig& config) {
  config.validate();
  if (pairs.size() < 2) throw Error("biencoder training needs at least 2 pairs");
  const std::size_t k = pairs.front().image.size();
  for (const auto& p : pairs) {
    if (p.image.size() != k || p.text.size() != k) throw Error("inconsistent dense dims");
    if (p.caption && p.caption->dim() != config.latent_dim) {
      throw Error("caption embedding dim " + std::to_string(p.caption->dim()) +
                  " does not match bi.latent_dim " + std::to_string(config.latent_dim));
    }
  }
  BiTrainResult<Real> result{bi_init<Real>(k, config.latent_dim, config.seed), {}};
  Rng rng(config.seed, 12);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<PairView> batch;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    BiLoss acc;
    for (std::size_t start = 0; start < order.size();) {
      std::size_t end = std::min(order.size(), start + config.batch_size);
      if (order.size() - end == 1) end = order.size();
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(pairs[order[i]]);
      BiGradient g;
      try {
        g = bi_grad(result.model, std::span<const PairView>(batch), config);
      } catch (const Error& e) {
        throw Error("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
      const double w = double(end - start);
      acc.rl += w * g.loss.rl;
      acc.cl += w * g.loss.cl;
      apply_gradient(result.model, g, config.learning_rate);
      start = end;
    }
    acc.rl /= double(order.size());
    acc.cl /= double(order.size());
    acc.total = acc.rl + config.lambda * acc.cl;
    if (!std::isfinite(acc.total) || !result.model.finite()) {
      throw Error("training diverged at epoch " + std::to_string(epoch));
    }
    result.trace.push_back({epoch, acc});
  }
  return result;
}

template <std::floating_point Real = float>
BiTrainResult<Real> bi_train(const DenseEmbeddingSet& images, const DenseEmbeddingSet& texts,
                             const SparseEmbeddingSet& captions_zc,
                             std::span<const CaptionRecord> captions,
                             const BiTrainConfig& config) {
  if (images.dim() != texts.dim()) throw Error("image and text dims differ");
  const auto pairs = resolve_pairs(images, texts, captions_zc, captions);
  return bi_train<Real>(std::span<const PairView>(pairs), config);
}

/// Sparse representation of every record: encode, mask with top-t (united
/// with active z_c dims when `captions_zc` holds the record id), sparsify.
template <std::floating_point Real>
SparseEmbeddingSet encode_corpus(const BiEncoderModel<Real>& model, Modality modality,
                                 const DenseEmbeddingSet& dense,
                                 const SparseEmbeddingSet* captions_zc, std::size_t top_t,
                                 double active_threshold) {
  if (dense.dim() != model.input_dim()) {
    throw Error("dense dim " + std::to_string(dense.dim()) + " does not match model k " +
                std::to_string(model.input_dim()));
  }
  if (captions_zc && captions_zc->dim() != model.latent_dim()) {
    throw Error("caption embedding dim does not match model d");
  }
  const auto& branch = model.branch(modality);
  SparseEmbeddingSet out(static_cast<std::uint32_t>(model.latent_dim()));
  out.reserve(dense.size());
  for (std::size_t i = 0; i < dense.size(); ++i) {
    const auto latent = encode_modality(branch, dense.row(i));
    const SparseVector* zc = captions_zc ? captions_zc->lookup(dense.id(i)) : nullptr;
    out.add(dense.id(i), sparsify(latent, record_mask(latent, zc, top_t, active_threshold)));
  }
  return out;
}

}  // namespace spdr
