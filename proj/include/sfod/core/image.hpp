// Copyright 2026 The sfod Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "sfod/core/error.hpp"

namespace sfod {

/// Interleaved (HWC) float image. Pixel (x, y) covers the unit square
/// [x, x+1) x [y, y+1), so its center sits at (x + 0.5, y + 0.5).
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(int w, int h, int c, float fill = 0.0f)
      : width(w), height(h), channels(c),
        pixels(static_cast<std::size_t>(w) * h * c, fill) {
    if (w < 0 || h < 0 || c < 0) throw DataError("negative image dimension");
  }

  bool empty() const noexcept { return pixels.empty(); }
  std::size_t size() const noexcept { return pixels.size(); }

  std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  float& at(int x, int y, int c) noexcept { return pixels[index(x, y, c)]; }
  float at(int x, int y, int c) const noexcept { return pixels[index(x, y, c)]; }

  bool same_shape(const Image& o) const noexcept {
    return width == o.width && height == o.height && channels == o.channels;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Maps an out-of-range index into [0, n) by mirroring with the edge pixel
/// repeated (d c b a | a b c d | d c b a).
inline int reflect_index(int i, int n) noexcept {
  if (n == 1) return 0;
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

inline int clamp_index(int i, int n) noexcept { return std::clamp(i, 0, n - 1); }

inline void clamp01(Image& img) noexcept {
  for (float& v : img.pixels) v = std::clamp(v, 0.0f, 1.0f);
}

/// Grayscale inputs become three identical channels; RGB passes through.
inline Image to_rgb(const Image& img) {
  if (img.channels == 3) return img;
  if (img.channels != 1) throw DataError("expected 1 or 3 channels");
  Image out(img.width, img.height, 3);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(x, y, 0);
  return out;
}

inline Image flip_horizontal(const Image& img) {
  Image out(img.width, img.height, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c)
        out.at(img.width - 1 - x, y, c) = img.at(x, y, c);
  return out;
}

inline float luma(float r, float g, float b) noexcept {
  return 0.299f * r + 0.587f * g + 0.114f * b;
}

/// Mean over every pixel, per channel.
inline std::vector<double> channel_means(const Image& img) {
  std::vector<double> m(img.channels, 0.0);
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  if (n == 0) return m;
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < img.channels; ++c) m[c] += img.pixels[i * img.channels + c];
  for (double& v : m) v /= static_cast<double>(n);
  return m;
}

/// Bilinear sample at continuous pixel-center coordinates (x = 0 is the
/// center of column 0); clamp-to-edge outside the image.
inline float sample_bilinear(const Image& img, double x, double y, int c) noexcept {
  const double fx = std::floor(x), fy = std::floor(y);
  const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
  const double ax = x - fx, ay = y - fy;
  const int xa = clamp_index(x0, img.width), xb = clamp_index(x0 + 1, img.width);
  const int ya = clamp_index(y0, img.height), yb = clamp_index(y0 + 1, img.height);
  const double top = (1.0 - ax) * img.at(xa, ya, c) + ax * img.at(xb, ya, c);
  const double bot = (1.0 - ax) * img.at(xa, yb, c) + ax * img.at(xb, yb, c);
  return static_cast<float>((1.0 - ay) * top + ay * bot);
}

/// Resamples the continuous region [x0, x1) x [y0, y1) to out_w x out_h.
/// Output pixel j samples at x0 + (j + 0.5) * (x1 - x0) / out_w, which is
/// the identity when the region is the whole image at the native size.
inline Image crop_resize(const Image& img, double x0, double y0, double x1, double y1,
                         int out_w, int out_h) {
  Image out(out_w, out_h, img.channels);
  const double sx = (x1 - x0) / out_w, sy = (y1 - y0) / out_h;
  // Same arithmetic as sample_bilinear with the column terms hoisted.
  struct Tap {
    int a, b;
    double t;
  };
  auto tap = [](double v, int n) {
    const double f = std::floor(v);
    const int i = static_cast<int>(f);
    return Tap{clamp_index(i, n), clamp_index(i + 1, n), v - f};
  };
  std::vector<Tap> cols(static_cast<std::size_t>(out_w));
  for (int i = 0; i < out_w; ++i) cols[i] = tap(x0 + (i + 0.5) * sx - 0.5, img.width);
  for (int j = 0; j < out_h; ++j) {
    const Tap r = tap(y0 + (j + 0.5) * sy - 0.5, img.height);
    for (int i = 0; i < out_w; ++i) {
      const Tap& q = cols[i];
      for (int c = 0; c < img.channels; ++c) {
        const double top = (1.0 - q.t) * img.at(q.a, r.a, c) + q.t * img.at(q.b, r.a, c);
        const double bot = (1.0 - q.t) * img.at(q.a, r.b, c) + q.t * img.at(q.b, r.b, c);
        out.at(i, j, c) = static_cast<float>((1.0 - r.t) * top + r.t * bot);
      }
    }
  }
  return out;
}

inline Image resize_bilinear(const Image& img, int out_w, int out_h) {
  return crop_resize(img, 0.0, 0.0, img.width, img.height, out_w, out_h);
}

/// 1-D correlation along x then y with reflect borders. kernel.size() must be odd.
inline Image convolve_separable(const Image& img, std::span<const double> kx,
                                std::span<const double> ky) {
  assert(kx.size() % 2 == 1 && ky.size() % 2 == 1);
  const int rx = static_cast<int>(kx.size() / 2), ry = static_cast<int>(ky.size() / 2);
  Image tmp(img.width, img.height, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double acc = 0.0;
        for (int k = -rx; k <= rx; ++k)
          acc += kx[k + rx] * img.at(reflect_index(x + k, img.width), y, c);
        tmp.at(x, y, c) = static_cast<float>(acc);
      }
  Image out(img.width, img.height, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double acc = 0.0;
        for (int k = -ry; k <= ry; ++k)
          acc += ky[k + ry] * tmp.at(x, reflect_index(y + k, img.height), c);
        out.at(x, y, c) = static_cast<float>(acc);
      }
  return out;
}

/// Dense 2-D kernel, row-major size x size (odd), reflect borders.
inline Image convolve2d(const Image& img, std::span<const double> kernel, int size) {
  assert(size % 2 == 1 && kernel.size() == static_cast<std::size_t>(size) * size);
  const int r = size / 2;
  Image out(img.width, img.height, img.channels);
  std::vector<double> acc(img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (int dy = -r; dy <= r; ++dy) {
        const int sy = reflect_index(y + dy, img.height);
        for (int dx = -r; dx <= r; ++dx) {
          const double w = kernel[(dy + r) * size + (dx + r)];
          if (w == 0.0) continue;
          const int sx = reflect_index(x + dx, img.width);
          for (int c = 0; c < img.channels; ++c) acc[c] += w * img.at(sx, sy, c);
        }
      }
      for (int c = 0; c < img.channels; ++c) out.at(x, y, c) = static_cast<float>(acc[c]);
    }
  return out;
}

struct Hsv {
  float h, s, v;  // h in [0, 1) turns
};

inline Hsv rgb_to_hsv(float r, float g, float b) noexcept {
  const float mx = std::max({r, g, b}), mn = std::min({r, g, b});
  const float d = mx - mn;
  float h = 0.0f;
  if (d > 0.0f) {
    if (mx == r)
      h = (g - b) / d;
    else if (mx == g)
      h = 2.0f + (b - r) / d;
    else
      h = 4.0f + (r - g) / d;
    h /= 6.0f;
    if (h < 0.0f) h += 1.0f;
  }
  const float s = mx > 0.0f ? d / mx : 0.0f;
  return {h, s, mx};
}

inline void hsv_to_rgb(Hsv c, float& r, float& g, float& b) noexcept {
  float h = c.h - std::floor(c.h);
  const float s = std::clamp(c.s, 0.0f, 1.0f), v = c.v;
  const float h6 = h * 6.0f;
  const int i = static_cast<int>(h6) % 6;
  const float f = h6 - std::floor(h6);
  const float p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (i) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
}

/// Peak signal-to-noise ratio for [0,1] images; +inf when identical.
inline double psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw DataError("psnr: shape mismatch");
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - b.pixels[i];
    se += d * d;
  }
  if (se == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = se / static_cast<double>(a.size());
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace sfod
