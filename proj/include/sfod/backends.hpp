// Copyright 2026 The sfod Authors
// SPDX-License-Identifier: Apache-2.0

// Model backends behind two small interfaces so the adaptation loop runs
// without a neural-network framework:
//
//   Detector            scores proposals; exposes parameters for EMA and SGD
//   ZeroShotClassifier  embeds patches and prompts into a shared space
//
// Desk-scale implementations: ToyDetector (histogram features + linear
// heads), CentroidClassifier (noisy class centroids, a stand-in for a
// vision-language model) and FileEmbeddingClassifier (serves embeddings
// computed elsewhere).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <numeric>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "sfod/core/error.hpp"
#include "sfod/core/image.hpp"
#include "sfod/core/matrix.hpp"
#include "sfod/core/rng.hpp"
#include "sfod/geometry.hpp"
#include "sfod/pseudo_label.hpp"
#include "sfod/tensor_io.hpp"

namespace sfod {

struct LossBreakdown {
  double roi = 0.0;  // mean cross-entropy over samples with a class target
  double rpn = 0.0;  // mean binary cross-entropy over samples with an objectness target
  double total() const noexcept { return roi + rpn; }
};

struct LossAndGrad {
  LossBreakdown loss;
  NamedTensors grads;
};

struct InferResult {
  std::vector<Detection> detections;
  std::vector<std::size_t> kept;     // proposal index per detection
  std::vector<std::size_t> skipped;  // zero-area or off-image proposals
  std::vector<double> objectness;    // per proposal, NaN when skipped
};

/// Per-proposal training target. class_id < 0: no classification target;
/// objectness < 0: no objectness target.
struct ProposalTarget {
  int class_id = -1;
  int objectness = -1;
  friend bool operator==(const ProposalTarget&, const ProposalTarget&) = default;
};

struct TrainingImage {
  const Image* image = nullptr;
  std::vector<OrientedBox> proposals;
  std::vector<ProposalTarget> targets;  // aligned with proposals
};

class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::size_t num_classes() const = 0;
  /// Deterministic for fixed parameters and inputs.
  virtual InferResult infer_detailed(const Image& image, const std::vector<OrientedBox>& proposals) const = 0;
  std::vector<Detection> infer(const Image& image, const std::vector<OrientedBox>& proposals) const {
    return infer_detailed(image, proposals).detections;
  }
  /// Loss over every targeted proposal in the batch, with gradients.
  virtual LossAndGrad loss_and_grad(const std::vector<TrainingImage>& batch) const = 0;
  virtual NamedTensors parameters() const = 0;
  virtual void set_parameters(const NamedTensors& params) = 0;
  /// Single-writer: callers must not run infer concurrently with this.
  virtual void apply_gradient_step(const NamedTensors& grads, double lr) = 0;
};

class ZeroShotClassifier {
 public:
  virtual ~ZeroShotClassifier() = default;
  virtual std::size_t dim() const = 0;
  virtual EmbeddingMatrix embed_images(const std::vector<Patch>& patches) const = 0;
  virtual EmbeddingMatrix text_embeddings(const PromptSet& prompts) const = 0;
  /// False for backends that identify patches by key alone; callers may
  /// then skip resampling pixels.
  virtual bool reads_pixels() const { return true; }
};

// ---- toy detector ---------------------------------------------------------

inline constexpr int kToyPatchSize = 32;
inline constexpr int kColorBins = 8;
inline constexpr int kOrientationBins = 4;
inline constexpr std::size_t kToyFeatureDim = 3 * kColorBins + kOrientationBins;  // 28

/// 3 x 8-bin color histogram (each channel scaled to sum to 8) followed by a
/// 4-bin gradient-orientation histogram on luma (magnitude weighted, scaled
/// to sum to 4). Orientation bins are centered on 0, 45, 90 and 135 degrees.
inline std::vector<double> toy_features(const Image& patch_in) {
  const Image patch = to_rgb(patch_in);
  std::vector<double> f(kToyFeatureDim, 0.0);
  const double npx = static_cast<double>(patch.width) * patch.height;
  for (int y = 0; y < patch.height; ++y)
    for (int x = 0; x < patch.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const int bin = std::clamp(static_cast<int>(patch.at(x, y, c) * kColorBins), 0, kColorBins - 1);
        f[c * kColorBins + bin] += 1.0;
      }
  for (int i = 0; i < 3 * kColorBins; ++i) f[i] *= kColorBins / npx;

  double total = 0.0;
  double* ori = f.data() + 3 * kColorBins;
  auto lum = [&](int x, int y) { return luma(patch.at(x, y, 0), patch.at(x, y, 1), patch.at(x, y, 2)); };
  for (int y = 1; y + 1 < patch.height; ++y)
    for (int x = 1; x + 1 < patch.width; ++x) {
      const double gx = 0.5 * (lum(x + 1, y) - lum(x - 1, y));
      const double gy = 0.5 * (lum(x, y + 1) - lum(x, y - 1));
      const double mag = std::hypot(gx, gy);
      if (mag <= 0.0) continue;
      double a = std::atan2(gy, gx);
      if (a < 0) a += std::numbers::pi;
      const int bin = static_cast<int>(std::floor((a + std::numbers::pi / 8) / (std::numbers::pi / 4))) % kOrientationBins;
      ori[bin] += mag;
      total += mag;
    }
  if (total > 0.0)
    for (int i = 0; i < kOrientationBins; ++i) ori[i] *= kOrientationBins / total;
  return f;
}

inline double sigmoid(double z) noexcept {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

/// One training example for the toy detector. class_id < 0 means no
/// classification target; objectness < 0 means no objectness target.
struct TrainingSample {
  std::vector<double> features;
  int class_id = -1;
  int objectness = -1;
};


/// Linear softmax classifier (RoI stand-in) plus a logistic objectness unit
/// (RPN stand-in) on toy_features of 32x32 patches. A proposal becomes a
/// detection when its objectness reaches `objectness_threshold`.
/// Parameters: cls.weight [K, F], cls.bias [K], obj.weight [F], obj.bias [1].
class ToyDetector final : public Detector {
 public:
  explicit ToyDetector(std::size_t num_classes, double momentum = 0.9, double objectness_threshold = 0.5)
      : k_(num_classes), momentum_(momentum), obj_thr_(objectness_threshold) {
    if (num_classes < 1) throw ConfigError("num_classes", "need at least one class");
    params_["cls.weight"] = Tensor({k_, kToyFeatureDim});
    params_["cls.bias"] = Tensor({k_});
    params_["obj.weight"] = Tensor({kToyFeatureDim});
    params_["obj.bias"] = Tensor({1});
  }

  /// Small Gaussian initialization of all weights.
  void randomize(std::uint64_t seed, double scale = 0.01) {
    CounterRng rng(derive_key(seed, 0x7D));
    for (auto& [name, t] : params_)
      for (double& v : t.values) v = scale * rng.normal();
    velocity_.clear();
  }

  std::size_t num_classes() const override { return k_; }
  double objectness_threshold() const noexcept { return obj_thr_; }
  double momentum() const noexcept { return momentum_; }

  NamedTensors parameters() const override { return params_; }

  void set_parameters(const NamedTensors& p) override {
    for (const auto& [name, t] : params_) {
      auto it = p.find(name);
      if (it == p.end()) throw DataError("missing parameter '" + name + "'");
      if (it->second.shape != t.shape) throw DataError("shape mismatch for parameter '" + name + "'");
    }
    if (p.size() != params_.size()) throw DataError("unexpected extra parameters");
    params_ = p;
  }

  void reset_optimizer() { velocity_.clear(); }

  /// SGD with momentum: v <- mu v + g; theta <- theta - lr v.
  void apply_gradient_step(const NamedTensors& grads, double lr) override {
    for (auto& [name, t] : params_) {
      auto it = grads.find(name);
      if (it == grads.end()) continue;
      if (it->second.shape != t.shape) throw DataError("gradient shape mismatch for '" + name + "'");
      auto& v = velocity_[name];
      if (v.size() != t.values.size()) v.assign(t.values.size(), 0.0);
      for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = momentum_ * v[i] + it->second.values[i];
        t.values[i] -= lr * v[i];
      }
    }
  }

  std::vector<double> class_probs(const std::vector<double>& f) const {
    const auto& w = params_.at("cls.weight").values;
    const auto& b = params_.at("cls.bias").values;
    std::vector<double> z(k_);
    for (std::size_t k = 0; k < k_; ++k) {
      double acc = b[k];
      for (std::size_t j = 0; j < kToyFeatureDim; ++j) acc += w[k * kToyFeatureDim + j] * f[j];
      z[k] = acc;
    }
    softmax_inplace(z);
    return z;
  }

  double objectness(const std::vector<double>& f) const {
    const auto& w = params_.at("obj.weight").values;
    double z = params_.at("obj.bias").values[0];
    for (std::size_t j = 0; j < kToyFeatureDim; ++j) z += w[j] * f[j];
    return sigmoid(z);
  }

  InferResult infer_detailed(const Image& image, const std::vector<OrientedBox>& proposals) const override {
    InferResult r;
    r.objectness.assign(proposals.size(), std::numeric_limits<double>::quiet_NaN());
    std::vector<OrientedBox> usable;
    std::vector<std::size_t> usable_idx;
    for (std::size_t i = 0; i < proposals.size(); ++i) {
      if (proposals[i].w > 0 && proposals[i].h > 0) {
        usable.push_back(proposals[i]);
        usable_idx.push_back(i);
      } else {
        r.skipped.push_back(i);
      }
    }
    PatchBatch batch = extract_patches(image, usable, kToyPatchSize);
    for (std::size_t d : batch.dropped) r.skipped.push_back(usable_idx[d]);
    std::sort(r.skipped.begin(), r.skipped.end());
    for (const Patch& p : batch.patches) {
      const std::size_t idx = usable_idx[p.box_index];
      const auto f = toy_features(p.pixels);
      const double obj = objectness(f);
      r.objectness[idx] = obj;
      if (obj < obj_thr_) continue;
      r.detections.push_back({proposals[idx], class_probs(f)});
      r.kept.push_back(idx);
    }
    return r;
  }

  LossBreakdown loss(const std::vector<TrainingSample>& samples) const { return loss_and_grad(samples, false).loss; }
  using Detector::infer;

  /// Mean cross-entropy through softmax plus mean binary cross-entropy on
  /// objectness, with analytic gradients for every parameter.
  LossAndGrad loss_and_grad(const std::vector<TrainingSample>& samples, bool want_grads = true) const {
    LossAndGrad out;
    if (want_grads)
      for (const auto& [name, t] : params_) out.grads[name] = Tensor(t.shape);
    std::size_t n_cls = 0, n_obj = 0;
    for (const auto& s : samples) {
      if (s.features.size() != kToyFeatureDim) throw DataError("feature vector has wrong length");
      if (s.class_id >= static_cast<int>(k_))
        throw DataError("class id " + std::to_string(s.class_id) + " out of range [0, " + std::to_string(k_) + ")");
      if (s.class_id >= 0) ++n_cls;
      if (s.objectness > 1) throw DataError("objectness target must be 0, 1 or unset");
      if (s.objectness >= 0) ++n_obj;
    }
    for (const auto& s : samples) {
      if (s.class_id >= 0) {
        const auto p = class_probs(s.features);
        out.loss.roi += -std::log(std::max(p[s.class_id], 1e-300)) / n_cls;
        if (want_grads) {
          auto& gw = out.grads["cls.weight"].values;
          auto& gb = out.grads["cls.bias"].values;
          for (std::size_t k = 0; k < k_; ++k) {
            const double d = (p[k] - (static_cast<int>(k) == s.class_id ? 1.0 : 0.0)) / n_cls;
            gb[k] += d;
            for (std::size_t j = 0; j < kToyFeatureDim; ++j) gw[k * kToyFeatureDim + j] += d * s.features[j];
          }
        }
      }
      if (s.objectness >= 0) {
        const double o = objectness(s.features);
        const double t = s.objectness;
        out.loss.rpn += -(t * std::log(std::max(o, 1e-300)) + (1 - t) * std::log(std::max(1 - o, 1e-300))) / n_obj;
        if (want_grads) {
          const double d = (o - t) / n_obj;
          out.grads["obj.bias"].values[0] += d;
          auto& gw = out.grads["obj.weight"].values;
          for (std::size_t j = 0; j < kToyFeatureDim; ++j) gw[j] += d * s.features[j];
        }
      }
    }
    return out;
  }

  /// Features of every targeted proposal that survives patch extraction.
  static std::vector<TrainingSample> samples_of(const std::vector<TrainingImage>& batch) {
    std::vector<TrainingSample> samples;
    for (const auto& ti : batch) {
      if (ti.proposals.size() != ti.targets.size()) throw DataError("proposals and targets differ in length");
      std::vector<OrientedBox> boxes;
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < ti.proposals.size(); ++i) {
        const auto& t = ti.targets[i];
        if ((t.class_id >= 0 || t.objectness >= 0) && ti.proposals[i].w > 0 && ti.proposals[i].h > 0) {
          boxes.push_back(ti.proposals[i]);
          idx.push_back(i);
        }
      }
      if (boxes.empty()) continue;
      for (const Patch& p : extract_patches(*ti.image, boxes, kToyPatchSize).patches) {
        const auto& t = ti.targets[idx[p.box_index]];
        samples.push_back({toy_features(p.pixels), t.class_id, t.objectness});
      }
    }
    return samples;
  }

  LossAndGrad loss_and_grad(const std::vector<TrainingImage>& batch) const override {
    return loss_and_grad(samples_of(batch));
  }

  /// Every patch is a positive with the given class.
  LossAndGrad loss_and_grad(const std::vector<Patch>& patches, const std::vector<int>& class_ids) const {
    if (patches.size() != class_ids.size()) throw DataError("patches and targets differ in length");
    std::vector<TrainingSample> samples;
    for (std::size_t i = 0; i < patches.size(); ++i) {
      if (class_ids[i] < 0 || class_ids[i] >= static_cast<int>(k_))
        throw DataError("class id " + std::to_string(class_ids[i]) + " out of range [0, " + std::to_string(k_) + ")");
      samples.push_back({toy_features(patches[i].pixels), class_ids[i], 1});
    }
    return loss_and_grad(samples);
  }

 private:
  std::size_t k_;
  double momentum_;
  double obj_thr_;
  NamedTensors params_;
  std::map<std::string, std::vector<double>> velocity_;
};

// ---- centroid classifier --------------------------------------------------

/// Resolves the true class of a patch; nullopt for background.
using PatchLabeler = std::function<std::optional<std::size_t>(const Patch&)>;

/// Orthonormal class centroids (plus one background direction) in D
/// dimensions. A patch of class k embeds as normalize(c_k + sigma * n) with
/// n ~ N(0, I_D) drawn from a stream keyed by (seed, patch key). sigma = 0
/// makes the classifier a perfect oracle. Truth comes from `labeler`, which
/// the harness backs with ground truth.
class CentroidClassifier final : public ZeroShotClassifier {
 public:
  CentroidClassifier(std::size_t num_classes, std::size_t dim, double sigma, std::uint64_t seed, PatchLabeler labeler)
      : k_(num_classes), d_(dim), sigma_(sigma), seed_(seed), labeler_(std::move(labeler)) {
    if (dim < num_classes + 1) throw ConfigError("embedding_dim", "embedding dim must exceed class count");
    if (sigma < 0) throw ConfigError("sigma", "sigma must be >= 0");
    centroids_ = Matrix(k_ + 1, d_);
    CounterRng rng(derive_key(seed, 0xCE));
    for (std::size_t i = 0; i <= k_; ++i) {
      auto r = centroids_.row(i);
      for (;;) {
        for (double& v : r) v = rng.normal();
        for (std::size_t j = 0; j < i; ++j) {
          auto q = centroids_.row(j);
          double dot = 0.0;
          for (std::size_t t = 0; t < d_; ++t) dot += r[t] * q[t];
          for (std::size_t t = 0; t < d_; ++t) r[t] -= dot * q[t];
        }
        double n2 = 0.0;
        for (double v : r) n2 += v * v;
        if (n2 > 1e-6) {
          for (double& v : r) v /= std::sqrt(n2);
          break;
        }
      }
    }
  }

  std::size_t dim() const override { return d_; }
  bool reads_pixels() const override { return false; }
  std::size_t num_classes() const noexcept { return k_; }
  double sigma() const noexcept { return sigma_; }

  /// Row k < K is class k; row K is the background direction.
  const Matrix& centroids() const noexcept { return centroids_; }

  std::vector<double> embed_class(std::optional<std::size_t> cls, std::uint64_t noise_key) const {
    const std::size_t row = cls ? *cls : k_;
    if (row > k_) throw DataError("labeler returned class " + std::to_string(row) + " >= K");
    std::vector<double> v(centroids_.row(row).begin(), centroids_.row(row).end());
    if (sigma_ > 0) {
      CounterRng rng(derive_key(seed_, 0xE3, noise_key));
      for (double& x : v) x += sigma_ * rng.normal();
    }
    double n2 = 0.0;
    for (double x : v) n2 += x * x;
    for (double& x : v) x /= std::sqrt(n2);
    return v;
  }

  EmbeddingMatrix embed_images(const std::vector<Patch>& patches) const override {
    EmbeddingMatrix out{Matrix(patches.size(), d_), true};
    for (std::size_t i = 0; i < patches.size(); ++i) {
      const auto v = embed_class(labeler_(patches[i]), hash_bytes(patches[i].key));
      std::copy(v.begin(), v.end(), out.values.row(i).begin());
    }
    return out;
  }

  EmbeddingMatrix text_embeddings(const PromptSet& prompts) const override {
    if (prompts.prompts.size() != k_)
      throw DataError("prompt count " + std::to_string(prompts.prompts.size()) + " != classifier classes " +
                      std::to_string(k_));
    EmbeddingMatrix out{Matrix(k_, d_), true};
    std::copy(centroids_.data.begin(), centroids_.data.begin() + k_ * d_, out.values.data.begin());
    return out;
  }

 private:
  std::size_t k_, d_;
  double sigma_;
  std::uint64_t seed_;
  PatchLabeler labeler_;
  Matrix centroids_;
};

/// Standalone top-1 accuracy of a CentroidClassifier over `trials` noisy
/// draws per class (argmax of cosine similarity).
inline double centroid_accuracy(std::size_t num_classes, std::size_t dim, double sigma, std::uint64_t seed,
                                std::size_t trials) {
  CentroidClassifier c(num_classes, dim, sigma, seed, [](const Patch&) { return std::nullopt; });
  std::size_t hits = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t cls = t % num_classes;
    const auto v = c.embed_class(cls, derive_key(0xACC, t));
    std::size_t best = 0;
    double best_dot = -1e300;
    for (std::size_t k = 0; k < num_classes; ++k) {
      auto r = c.centroids().row(k);
      double dot = 0.0;
      for (std::size_t j = 0; j < dim; ++j) dot += r[j] * v[j];
      if (dot > best_dot) best_dot = dot, best = k;
    }
    hits += best == cls;
  }
  return static_cast<double>(hits) / static_cast<double>(trials);
}

/// Bisection on sigma so centroid_accuracy hits `target` (accuracy falls
/// monotonically with sigma up to Monte-Carlo noise).
inline double calibrate_sigma(std::size_t num_classes, std::size_t dim, double target, std::uint64_t seed,
                              std::size_t trials = 4000) {
  double lo = 0.0, hi = 1.0;
  while (centroid_accuracy(num_classes, dim, hi, seed, trials) > target && hi < 1e3) hi *= 2;
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (centroid_accuracy(num_classes, dim, mid, seed, trials) > target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// ---- file-backed classifier -----------------------------------------------

/// Serves embeddings produced outside this toolkit: text rows keyed by class
/// name, image rows keyed by patch key. Never fabricates a missing row.
class FileEmbeddingClassifier final : public ZeroShotClassifier {
 public:
  FileEmbeddingClassifier(KeyedEmbeddings text, KeyedEmbeddings images)
      : text_(std::move(text)), images_(std::move(images)) {
    if (text_.matrix.dim() != images_.matrix.dim() && images_.matrix.rows() > 0)
      throw DataError("text embedding D=" + std::to_string(text_.matrix.dim()) + " but image embedding D=" +
                      std::to_string(images_.matrix.dim()));
    if (text_.keys.size() != text_.matrix.rows())
      throw DataError("text embedding file must carry one class-name key per row");
    if (images_.keys.size() != images_.matrix.rows())
      throw DataError("image embedding file must carry one patch key per row");
    for (std::size_t i = 0; i < images_.keys.size(); ++i)
      if (!image_index_.emplace(images_.keys[i], i).second)
        throw DataError("duplicate patch key '" + images_.keys[i] + "'");
  }

  std::size_t dim() const override { return text_.matrix.dim(); }
  bool reads_pixels() const override { return false; }
  std::size_t num_classes() const noexcept { return text_.matrix.rows(); }

  EmbeddingMatrix embed_images(const std::vector<Patch>& patches) const override {
    EmbeddingMatrix out{Matrix(patches.size(), dim()), images_.matrix.normalized};
    for (std::size_t i = 0; i < patches.size(); ++i) {
      auto it = image_index_.find(patches[i].key);
      if (it == image_index_.end()) throw DataError("no image embedding for patch key '" + patches[i].key + "'");
      auto src = images_.matrix.values.row(it->second);
      std::copy(src.begin(), src.end(), out.values.row(i).begin());
    }
    return out;
  }

  EmbeddingMatrix text_embeddings(const PromptSet& prompts) const override {
    const std::size_t k = prompts.class_names.size();
    if (k != text_.matrix.rows())
      throw DataError("embedding file has K=" + std::to_string(text_.matrix.rows()) + " classes but class list has K=" +
                      std::to_string(k));
    EmbeddingMatrix out{Matrix(k, dim()), text_.matrix.normalized};
    for (std::size_t c = 0; c < k; ++c) {
      auto it = std::find(text_.keys.begin(), text_.keys.end(), prompts.class_names[c]);
      if (it == text_.keys.end())
        throw DataError("no text embedding for class '" + prompts.class_names[c] + "'");
      auto src = text_.matrix.values.row(static_cast<std::size_t>(it - text_.keys.begin()));
      std::copy(src.begin(), src.end(), out.values.row(c).begin());
    }
    return out;
  }

 private:
  KeyedEmbeddings text_;
  KeyedEmbeddings images_;
  std::unordered_map<std::string, std::size_t> image_index_;
};

inline FileEmbeddingClassifier load_file_embeddings(const std::filesystem::path& text_path,
                                                    const std::filesystem::path& image_path) {
  return FileEmbeddingClassifier(load_embeddings(text_path), load_embeddings(image_path));
}

}  // namespace sfod
