// Copyright 2026 The sfod Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "sfod/core/error.hpp"
#include "sfod/core/image.hpp"
#include "sfod/core/rng.hpp"
#include "sfod/geometry.hpp"

namespace sfod {

/// Normalized 1-D Gaussian, radius ceil(3 sigma). sigma <= 0 gives {1}.
inline std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) return {1.0};
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    k[i + r] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += k[i + r];
  }
  for (double& v : k) v /= sum;
  return k;
}

/// Separable Gaussian blur with reflect borders; sigma = 0 returns the input.
inline Image gaussian_blur(const Image& img, double sigma) {
  if (sigma < 0.0) throw ConfigError("sigma", "blur sigma must be >= 0");
  if (sigma == 0.0) return img;
  const auto k = gaussian_kernel(sigma);
  return convolve_separable(img, k, k);
}

// ---- weak view -------------------------------------------------------------

struct WeakResult {
  Image image;
  std::vector<OrientedBox> boxes;
  bool flipped = false;
};

inline OrientedBox flip_box(const OrientedBox& b, double image_width) noexcept {
  return {image_width - b.cx, b.cy, b.w, b.h, normalize_angle(-b.theta)};
}

inline WeakResult weak_augment(const Image& img, const std::vector<OrientedBox>& boxes, bool flip) {
  WeakResult r;
  r.flipped = flip;
  if (!flip) {
    r.image = img;
    r.boxes = boxes;
    return r;
  }
  r.image = flip_horizontal(img);
  r.boxes.reserve(boxes.size());
  for (const auto& b : boxes) r.boxes.push_back(flip_box(b, img.width));
  return r;
}

/// Horizontal flip with probability `flip_prob` (0.5 by default).
inline WeakResult weak_augment(const Image& img, const std::vector<OrientedBox>& boxes, CounterRng& rng,
                               double flip_prob = 0.5) {
  return weak_augment(img, boxes, rng.bernoulli(flip_prob));
}

// ---- strong view (photometric only) ---------------------------------------

struct StrongAugmentConfig {
  double jitter_prob = 0.8;
  double brightness = 0.4;
  double contrast = 0.4;
  double saturation = 0.4;
  double hue = 0.1;
  double grayscale_prob = 0.2;
  double blur_prob = 0.5;
  double blur_sigma_min = 0.1;
  double blur_sigma_max = 2.0;
  double cutout_prob = 0.7;
  int cutout_min = 1;
  int cutout_max = 5;
  double cutout_max_frac = 0.2;            // rectangle side <= frac * image side
  std::vector<float> cutout_fill{0.479f, 0.468f, 0.378f};  // per-channel mean of the synthetic scenes

  static StrongAugmentConfig identity() {
    StrongAugmentConfig c;
    c.jitter_prob = c.grayscale_prob = c.blur_prob = c.cutout_prob = 0.0;
    return c;
  }
};

struct JitterFactors {
  double brightness = 1.0;
  double contrast = 1.0;
  double saturation = 1.0;
  double hue = 0.0;  // shift in turns
};

inline Image to_grayscale(const Image& src) {
  Image img = to_rgb(src);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const float l = luma(img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2));
      img.at(x, y, 0) = img.at(x, y, 1) = img.at(x, y, 2) = l;
    }
  return img;
}

/// Brightness, contrast, saturation, hue in that fixed order, clamped after each.
inline Image color_jitter(const Image& src, const JitterFactors& f) {
  Image img = to_rgb(src);
  auto px = [&](auto&& fn) {
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) fn(img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2));
  };
  auto clip = [](float v) { return std::clamp(v, 0.0f, 1.0f); };
  if (f.brightness != 1.0) {
    const float b = static_cast<float>(f.brightness);
    px([&](float& r, float& g, float& bl) { r = clip(r * b), g = clip(g * b), bl = clip(bl * b); });
  }
  if (f.contrast != 1.0) {
    double mean = 0.0;
    px([&](float& r, float& g, float& b) { mean += luma(r, g, b); });
    mean /= static_cast<double>(img.width) * img.height;
    const float m = static_cast<float>(mean), c = static_cast<float>(f.contrast);
    px([&](float& r, float& g, float& b) {
      r = clip((r - m) * c + m), g = clip((g - m) * c + m), b = clip((b - m) * c + m);
    });
  }
  if (f.saturation != 1.0) {
    const float s = static_cast<float>(f.saturation);
    px([&](float& r, float& g, float& b) {
      const float l = luma(r, g, b);
      r = clip(l + (r - l) * s), g = clip(l + (g - l) * s), b = clip(l + (b - l) * s);
    });
  }
  if (f.hue != 0.0) {
    const float h = static_cast<float>(f.hue);
    px([&](float& r, float& g, float& b) {
      Hsv c = rgb_to_hsv(r, g, b);
      c.h += h;
      hsv_to_rgb(c, r, g, b);
    });
  }
  return img;
}

struct CutoutRect {
  int x0, y0, x1, y1;  // half-open pixel ranges
};

inline Image cutout(const Image& src, const std::vector<CutoutRect>& rects, const std::vector<float>& fill) {
  Image img = src;
  for (const auto& r : rects)
    for (int y = std::max(r.y0, 0); y < std::min(r.y1, img.height); ++y)
      for (int x = std::max(r.x0, 0); x < std::min(r.x1, img.width); ++x)
        for (int c = 0; c < img.channels; ++c)
          img.at(x, y, c) = fill.empty() ? 0.0f : fill[static_cast<std::size_t>(c) % fill.size()];
  return img;
}

/// Photometric strong view: jitter, grayscale, blur, cutout, each gated by
/// its own probability. Never changes geometry or dimensions, so boxes from
/// the weak view stay valid.
inline Image strong_augment(const Image& src, CounterRng& rng, const StrongAugmentConfig& cfg = {}) {
  Image img = src;
  if (rng.bernoulli(cfg.jitter_prob)) {
    JitterFactors f;
    f.brightness = rng.uniform(std::max(0.0, 1.0 - cfg.brightness), 1.0 + cfg.brightness);
    f.contrast = rng.uniform(std::max(0.0, 1.0 - cfg.contrast), 1.0 + cfg.contrast);
    f.saturation = rng.uniform(std::max(0.0, 1.0 - cfg.saturation), 1.0 + cfg.saturation);
    f.hue = rng.uniform(-cfg.hue, cfg.hue);
    img = color_jitter(img, f);
  }
  if (rng.bernoulli(cfg.grayscale_prob)) img = to_grayscale(img);
  if (rng.bernoulli(cfg.blur_prob)) img = gaussian_blur(img, rng.uniform(cfg.blur_sigma_min, cfg.blur_sigma_max));
  if (rng.bernoulli(cfg.cutout_prob)) {
    const int n = rng.uniform_int(cfg.cutout_min, cfg.cutout_max);
    std::vector<CutoutRect> rects;
    const int max_w = std::max(1, static_cast<int>(cfg.cutout_max_frac * img.width));
    const int max_h = std::max(1, static_cast<int>(cfg.cutout_max_frac * img.height));
    for (int i = 0; i < n; ++i) {
      const int w = rng.uniform_int(1, max_w), h = rng.uniform_int(1, max_h);
      const int x0 = rng.uniform_int(0, img.width - w), y0 = rng.uniform_int(0, img.height - h);
      rects.push_back({x0, y0, x0 + w, y0 + h});
    }
    img = cutout(img, rects, cfg.cutout_fill);
  }
  return img;
}

/// Weak and strong views of one source image from one seed stream. The
/// strong view is built on top of the weak frame so the (possibly flipped)
/// weak boxes apply to both.
struct AugmentedPair {
  Image weak_image;
  Image strong_image;
  std::vector<OrientedBox> weak_labels;
  bool flipped = false;
  std::uint64_t rng_seed = 0;
};

inline AugmentedPair make_augmented_pair(const Image& img, const std::vector<OrientedBox>& boxes,
                                         std::uint64_t stream_key, const StrongAugmentConfig& cfg = {},
                                         double flip_prob = 0.5) {
  CounterRng weak_rng(stream_key);
  CounterRng strong_rng = weak_rng.fork(0x5752);
  WeakResult w = weak_augment(img, boxes, weak_rng, flip_prob);
  AugmentedPair p;
  p.strong_image = strong_augment(w.image, strong_rng, cfg);
  p.weak_image = std::move(w.image);
  p.weak_labels = std::move(w.boxes);
  p.flipped = w.flipped;
  p.rng_seed = stream_key;
  return p;
}

}  // namespace sfod
