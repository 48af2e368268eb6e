// Copyright 2026 The sfod Authors
// SPDX-License-Identifier: Apache-2.0

// Procedural layers used by the weather corruptions.

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "sfod/core/image.hpp"
#include "sfod/core/rng.hpp"

namespace sfod {

/// Single-channel float field, row-major.
struct Field {
  int width = 0;
  int height = 0;
  std::vector<double> v;

  Field() = default;
  Field(int w, int h, double fill = 0.0) : width(w), height(h), v(static_cast<std::size_t>(w) * h, fill) {}
  double& operator()(int x, int y) noexcept { return v[static_cast<std::size_t>(y) * width + x]; }
  double operator()(int x, int y) const noexcept { return v[static_cast<std::size_t>(y) * width + x]; }

  void normalize01() {
    if (v.empty()) return;
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    const double a = *lo, span = *hi - *lo;
    for (double& x : v) x = span > 0 ? (x - a) / span : 0.0;
  }
};

inline Image field_to_image(const Field& f) {
  Image img(f.width, f.height, 1);
  for (std::size_t i = 0; i < f.v.size(); ++i) img.pixels[i] = static_cast<float>(f.v[i]);
  return img;
}

inline Field image_to_field(const Image& img) {
  Field f(img.width, img.height);
  for (std::size_t i = 0; i < f.v.size(); ++i) f.v[i] = img.pixels[i * img.channels];
  return f;
}

/// Diamond-square plasma on a toroidal size x size grid (size a power of
/// two), normalized to [0, 1]. Each level perturbs midpoints by
/// wibble * U(-wibble, wibble), with wibble starting at 100 and divided by
/// `wibble_decay` per level.
inline Field plasma_fractal(int size, double wibble_decay, CounterRng& rng) {
  Field m(size, size, 0.0);
  int step = size;
  double wibble = 100.0;
  auto wrap = [size](int i) { return ((i % size) + size) % size; };
  auto jitter = [&](double sum) { return sum / 4.0 + wibble * rng.uniform(-wibble, wibble); };
  while (step >= 2) {
    const int half = step / 2;
    // squares: centers from the four corners
    for (int y = 0; y < size; y += step)
      for (int x = 0; x < size; x += step) {
        const double s = m(x, y) + m(wrap(x + step), y) + m(x, wrap(y + step)) + m(wrap(x + step), wrap(y + step));
        m(x + half, y + half) = jitter(s);
      }
    // diamonds: edge midpoints from two corners and two centers
    for (int y = 0; y < size; y += step)
      for (int x = 0; x < size; x += step) {
        const double top = m(x, y) + m(wrap(x + step), y) + m(x + half, y + half) + m(x + half, wrap(y - half));
        m(x + half, y) = jitter(top);
        const double left = m(x, y) + m(x, wrap(y + step)) + m(x + half, y + half) + m(wrap(x - half), y + half);
        m(x, y + half) = jitter(left);
      }
    step /= 2;
    wibble /= wibble_decay;
  }
  m.normalize01();
  return m;
}

inline int next_pow2(int n) {
  int p = 1;
  while (p < n) p *= 2;
  return p;
}

/// Sum of bilinearly interpolated random lattices; octave o has cell size
/// base_cell / 2^o and weight persistence^o. Normalized to [0, 1].
inline Field value_noise(int w, int h, double base_cell, int octaves, double persistence, CounterRng& rng) {
  Field out(w, h, 0.0);
  double amp = 1.0, cell = base_cell;
  for (int o = 0; o < octaves; ++o) {
    const int gw = static_cast<int>(std::ceil(w / cell)) + 2, gh = static_cast<int>(std::ceil(h / cell)) + 2;
    std::vector<double> lattice(static_cast<std::size_t>(gw) * gh);
    for (double& v : lattice) v = rng.uniform();
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double fx = x / cell, fy = y / cell;
        const int ix = static_cast<int>(fx), iy = static_cast<int>(fy);
        double tx = fx - ix, ty = fy - iy;
        tx = tx * tx * (3 - 2 * tx);
        ty = ty * ty * (3 - 2 * ty);
        auto L = [&](int a, int b) { return lattice[static_cast<std::size_t>(b) * gw + a]; };
        const double top = (1 - tx) * L(ix, iy) + tx * L(ix + 1, iy);
        const double bot = (1 - tx) * L(ix, iy + 1) + tx * L(ix + 1, iy + 1);
        out(x, y) += amp * ((1 - ty) * top + ty * bot);
      }
    amp *= persistence;
    cell = std::max(1.0, cell / 2);
  }
  out.normalize01();
  return out;
}

/// Frost stand-in: ridged multi-octave noise with a cold white-blue tint,
/// RGB in [0, 1]. Replaces the photographic frost overlays.
inline Image frost_layer(int w, int h, CounterRng& rng) {
  Field base = value_noise(w, h, 24.0, 5, 0.6, rng);
  Field fine = value_noise(w, h, 4.0, 3, 0.5, rng);
  Image out(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double ridge = 1.0 - std::abs(2.0 * fine(x, y) - 1.0);
      const double v = std::clamp(0.15 + 0.55 * base(x, y) + 0.35 * ridge * ridge * ridge, 0.0, 1.0);
      out.at(x, y, 0) = static_cast<float>(0.85 * v);
      out.at(x, y, 1) = static_cast<float>(0.92 * v);
      out.at(x, y, 2) = static_cast<float>(std::min(1.0, 1.02 * v));
    }
  return out;
}

/// Cloud opacity mask in [0, 1]: low-frequency fractal noise pushed through
/// a soft threshold so roughly `coverage` of the area is clouded.
inline Field cloud_mask(int w, int h, double coverage, CounterRng& rng) {
  Field n = value_noise(w, h, std::max(w, h) / 2.0, 5, 0.55, rng);
  std::vector<double> sorted = n.v;
  std::sort(sorted.begin(), sorted.end());
  const double cut = sorted[static_cast<std::size_t>(std::clamp(1.0 - coverage, 0.0, 1.0) * (sorted.size() - 1))];
  const double soft = 0.12;
  for (double& v : n.v) v = std::clamp((v - cut) / soft + 0.5, 0.0, 1.0);
  return n;
}

}  // namespace sfod
