// Copyright 2026 The sfod Authors
// SPDX-License-Identifier: Apache-2.0

// Pseudo-label generation: zero-shot class scores for detected patches and
// their aggregation with the teacher's scores, followed by confidence
// filtering.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "sfod/core/error.hpp"
#include "sfod/core/image.hpp"
#include "sfod/core/matrix.hpp"
#include "sfod/geometry.hpp"

namespace sfod {

inline constexpr std::string_view kClassPlaceholder = "[Class]";
inline constexpr std::string_view kDefaultPromptTemplate = "An aerial image of a [Class]";
inline constexpr double kDefaultTau = 0.7;
inline constexpr double kDefaultTemperature = 100.0;
inline constexpr int kDefaultPatchSize = 224;

struct PromptSet {
  std::vector<std::string> class_names;
  std::vector<std::string> prompts;
};

/// Literal substitution of `[Class]`; no grammar fixes ("a airport" stays).
inline PromptSet build_prompts(const std::vector<std::string>& class_names,
                               std::string_view tmpl = kDefaultPromptTemplate) {
  if (class_names.empty()) throw ConfigError("class_names", "class name list is empty");
  const auto first = tmpl.find(kClassPlaceholder);
  if (first == std::string_view::npos)
    throw ConfigError("prompt_template", "prompt template has no [Class] placeholder");
  if (tmpl.find(kClassPlaceholder, first + 1) != std::string_view::npos)
    throw ConfigError("prompt_template", "prompt template has more than one [Class] placeholder");
  PromptSet ps;
  ps.class_names = class_names;
  for (const auto& name : class_names) {
    std::string p(tmpl.substr(0, first));
    p += name;
    p += tmpl.substr(first + kClassPlaceholder.size());
    ps.prompts.push_back(std::move(p));
  }
  return ps;
}

/// N x K per-box class probabilities (teacher, zero-shot or refined).
using ClassScores = Matrix;

/// Embedding rows with a flag recording whether every row has unit L2 norm.
struct EmbeddingMatrix {
  Matrix values;
  bool normalized = false;

  std::size_t rows() const noexcept { return values.rows; }
  std::size_t dim() const noexcept { return values.cols; }
};

inline EmbeddingMatrix l2_normalized(EmbeddingMatrix m, std::string_view what = "embedding") {
  for (std::size_t i = 0; i < m.values.rows; ++i) {
    auto r = m.values.row(i);
    double n2 = 0.0;
    for (double v : r) {
      if (!std::isfinite(v))
        throw DataError(std::string(what) + " row " + std::to_string(i) + " is not finite");
      n2 += v * v;
    }
    if (!(n2 > 0.0))
      throw DataError(std::string(what) + " row " + std::to_string(i) + " has zero norm");
    const double inv = 1.0 / std::sqrt(n2);
    for (double& v : r) v *= inv;
  }
  m.normalized = true;
  return m;
}

inline void softmax_inplace(std::span<double> row) noexcept {
  if (row.empty()) return;
  const double mx = *std::max_element(row.begin(), row.end());
  double sum = 0.0;
  for (double& v : row) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : row) v /= sum;
}

/// Row-wise softmax(temperature * Fv Ft^T). Rows not flagged as normalized
/// are L2-normalized first. temperature = 1 is the plain dot-product form.
inline ClassScores zero_shot_scores(const EmbeddingMatrix& image_emb, const EmbeddingMatrix& text_emb,
                                    double temperature = kDefaultTemperature) {
  if (!(temperature > 0.0)) throw ConfigError("temperature", "temperature must be positive");
  if (image_emb.dim() != text_emb.dim())
    throw DataError("embedding dimension mismatch: image D=" + std::to_string(image_emb.dim()) +
                    ", text D=" + std::to_string(text_emb.dim()));
  const EmbeddingMatrix fv = image_emb.normalized ? image_emb : l2_normalized(image_emb, "image embedding");
  const EmbeddingMatrix ft = text_emb.normalized ? text_emb : l2_normalized(text_emb, "text embedding");
  const std::size_t n = fv.rows(), k = ft.rows(), d = fv.dim();
  ClassScores out(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    auto vi = fv.values.row(i);
    auto oi = out.row(i);
    for (std::size_t j = 0; j < k; ++j) {
      auto tj = ft.values.row(j);
      double dot = 0.0;
      for (std::size_t t = 0; t < d; ++t) dot += vi[t] * tj[t];
      oi[j] = temperature * dot;
    }
    softmax_inplace(oi);
  }
  return out;
}

/// Keeps a row of the teacher scores when its argmax agrees with the
/// zero-shot argmax; otherwise blends (1 - lambda) * teacher + lambda * zero-shot.
inline ClassScores cga_refine(const ClassScores& teacher, const ClassScores& zero_shot, double lambda) {
  if (!teacher.same_shape(zero_shot))
    throw DataError("cga_refine: shape mismatch " + shape_str(teacher) + " vs " + shape_str(zero_shot));
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda", "lambda must lie in [0, 1]");
  ClassScores out = teacher;
  for (std::size_t i = 0; i < teacher.rows; ++i) {
    auto w = teacher.row(i);
    auto c = zero_shot.row(i);
    if (argmax(w.data(), w.size()) == argmax(c.data(), c.size())) continue;
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] = (1.0 - lambda) * w[j] + lambda * c[j];
  }
  return out;
}

struct PseudoLabel {
  OrientedBox box;
  std::size_t class_id = 0;
  double score = 0.0;
  friend bool operator==(const PseudoLabel&, const PseudoLabel&) = default;
};

/// Argmax class and its score per detection; keeps score >= tau, sorted by
/// score descending (stable in input order).
inline std::vector<PseudoLabel> filter_by_confidence(const std::vector<Detection>& dets, double tau = kDefaultTau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau", "tau must lie in [0, 1]");
  std::vector<PseudoLabel> out;
  for (const auto& d : dets) {
    if (d.scores.empty()) continue;
    const std::size_t k = argmax(d.scores);
    if (d.scores[k] >= tau) out.push_back({d.box, k, d.scores[k]});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const PseudoLabel& a, const PseudoLabel& b) { return a.score > b.score; });
  return out;
}

inline ClassScores scores_of(const std::vector<Detection>& dets, std::size_t num_classes) {
  ClassScores m(dets.size(), num_classes);
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (dets[i].scores.size() != num_classes)
      throw DataError("detection " + std::to_string(i) + " has " + std::to_string(dets[i].scores.size()) +
                      " scores, expected " + std::to_string(num_classes));
    std::copy(dets[i].scores.begin(), dets[i].scores.end(), m.row(i).begin());
  }
  return m;
}

inline std::vector<Detection> with_scores(std::vector<Detection> dets, const ClassScores& scores) {
  if (scores.rows != dets.size()) throw DataError("with_scores: row count mismatch");
  for (std::size_t i = 0; i < dets.size(); ++i) dets[i].scores = scores.row_vector(i);
  return dets;
}

/// A resampled crop; `box_index` points back into the input box list.
/// `key` identifies the patch to file-backed classifiers ("<image>:<box>");
/// callers that need it fill it in.
struct Patch {
  Image pixels;
  std::size_t box_index = 0;
  OrientedBox source_box;
  HorizontalBox region;
  std::string key;
};

struct PatchBatch {
  std::vector<Patch> patches;
  std::vector<std::size_t> dropped;  // input indices that clipped to nothing
};

/// For each box: horizontal hull, clip to the image, bilinear resample the
/// clipped region to out_size x out_size. Aspect ratio is not preserved.
inline PatchBatch extract_patches(const Image& image, const std::vector<OrientedBox>& boxes,
                                  int out_size = kDefaultPatchSize) {
  if (image.empty()) throw DataError("extract_patches: empty image");
  if (out_size < 1) throw ConfigError("patch_size", "patch size must be >= 1");
  PatchBatch batch;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    auto clipped = clip_to_image(to_horizontal(boxes[i]), image.width, image.height);
    if (!clipped) {
      batch.dropped.push_back(i);
      continue;
    }
    Patch p;
    p.pixels = crop_resize(image, clipped->x0(), clipped->y0(), clipped->x1(), clipped->y1(), out_size, out_size);
    p.box_index = i;
    p.source_box = boxes[i];
    p.region = *clipped;
    batch.patches.push_back(std::move(p));
  }
  return batch;
}

}  // namespace sfod
