// Copyright 2026 The sfod Authors
// SPDX-License-Identifier: Apache-2.0

// Corrupted-dataset generation: ImageNet-C style corruptions plus a
// procedural cloud composite, applied deterministically per file.
//
// frost and cloudy synthesize their overlays procedurally (fractal value
// noise) instead of using photographic overlay assets; the blend equations
// are the usual ones.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "sfod/augment.hpp"
#include "sfod/core/error.hpp"
#include "sfod/core/image.hpp"
#include "sfod/core/image_io.hpp"
#include "sfod/core/parallel.hpp"
#include "sfod/core/rng.hpp"
#include "sfod/corrupt/severity.hpp"
#include "sfod/corrupt/textures.hpp"

namespace sfod {

namespace corruption {

inline Image add_gaussian_noise(const Image& x, double sigma, CounterRng& rng) {
  Image out = x;
  for (float& v : out.pixels) v += static_cast<float>(sigma * rng.normal());
  return out;
}

inline Image shot_noise(const Image& x, double photons, CounterRng& rng) {
  Image out = x;
  for (float& v : out.pixels)
    v = static_cast<float>(static_cast<double>(rng.poisson(std::max(0.0f, v) * photons)) / photons);
  return out;
}

/// Salt-and-pepper on each channel value independently at rate `amount`.
inline Image impulse_noise(const Image& x, double amount, CounterRng& rng) {
  Image out = x;
  for (float& v : out.pixels)
    if (rng.bernoulli(amount)) v = rng.bernoulli(0.5) ? 1.0f : 0.0f;
  return out;
}

inline Image speckle_noise(const Image& x, double sigma, CounterRng& rng) {
  Image out = x;
  for (float& v : out.pixels) v += static_cast<float>(v * sigma * rng.normal());
  return out;
}

inline Image contrast(const Image& x, double factor) {
  if (factor == 1.0) return x;
  Image out = x;
  const auto means = channel_means(x);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double m = means[i % x.channels];
    out.pixels[i] = static_cast<float>((x.pixels[i] - m) * factor + m);
  }
  return out;
}

/// Adds `delta` to the HSV value channel.
inline Image brightness(const Image& src, double delta) {
  Image x = to_rgb(src);
  for (int y = 0; y < x.height; ++y)
    for (int i = 0; i < x.width; ++i) {
      Hsv c = rgb_to_hsv(x.at(i, y, 0), x.at(i, y, 1), x.at(i, y, 2));
      c.v = std::clamp(c.v + static_cast<float>(delta), 0.0f, 1.0f);
      hsv_to_rgb(c, x.at(i, y, 0), x.at(i, y, 1), x.at(i, y, 2));
    }
  return x;
}

/// HSV saturation s -> s * factor + offset.
inline Image saturate(const Image& src, double factor, double offset) {
  Image x = to_rgb(src);
  for (int y = 0; y < x.height; ++y)
    for (int i = 0; i < x.width; ++i) {
      Hsv c = rgb_to_hsv(x.at(i, y, 0), x.at(i, y, 1), x.at(i, y, 2));
      c.s = std::clamp(static_cast<float>(c.s * factor + offset), 0.0f, 1.0f);
      hsv_to_rgb(c, x.at(i, y, 0), x.at(i, y, 1), x.at(i, y, 2));
    }
  return x;
}

/// Downsample to floor(scale * size) by taking the top-left pixel of each
/// source block (nearest), then nearest upsample back to the input size.
inline Image pixelate(const Image& x, double scale) {
  const int sw = std::max(1, static_cast<int>(std::floor(x.width * scale)));
  const int sh = std::max(1, static_cast<int>(std::floor(x.height * scale)));
  Image small(sw, sh, x.channels);
  for (int j = 0; j < sh; ++j)
    for (int i = 0; i < sw; ++i) {
      // first output pixel that the upsampling below maps to block (i, j)
      const int sx = static_cast<int>((static_cast<long long>(i) * x.width + sw - 1) / sw);
      const int sy = static_cast<int>((static_cast<long long>(j) * x.height + sh - 1) / sh);
      for (int c = 0; c < x.channels; ++c) small.at(i, j, c) = x.at(sx, sy, c);
    }
  Image out(x.width, x.height, x.channels);
  for (int y = 0; y < x.height; ++y)
    for (int i = 0; i < x.width; ++i) {
      const int sx = static_cast<int>(static_cast<long long>(i) * sw / x.width);
      const int sy = static_cast<int>(static_cast<long long>(y) * sh / x.height);
      for (int c = 0; c < x.channels; ++c) out.at(i, y, c) = small.at(sx, sy, c);
    }
  return out;
}

inline Image jpeg(const Image& x, int quality) { return decode_jpeg(encode_jpeg(x, quality)); }

/// Aliased disk of `radius`, smoothed by a Gaussian of `alias_sigma`.
inline std::vector<double> disk_kernel(double radius, double alias_sigma, int& size) {
  const int r = std::max(8, static_cast<int>(std::ceil(radius)));
  const auto g = gaussian_kernel(alias_sigma);
  const int gr = static_cast<int>(g.size() / 2);
  size = 2 * (r + gr) + 1;
  std::vector<double> disk(static_cast<std::size_t>(size) * size, 0.0), k(disk.size(), 0.0);
  const int c = size / 2;
  for (int y = -r; y <= r; ++y)
    for (int x = -r; x <= r; ++x)
      if (x * x + y * y <= radius * radius) disk[(y + c) * size + (x + c)] = 1.0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double acc = 0.0;
      for (int dy = -gr; dy <= gr; ++dy)
        for (int dx = -gr; dx <= gr; ++dx) {
          const int sx = x + dx, sy = y + dy;
          if (sx < 0 || sy < 0 || sx >= size || sy >= size) continue;
          acc += g[dy + gr] * g[dx + gr] * disk[sy * size + sx];
        }
      k[y * size + x] = acc;
    }
  double sum = 0.0;
  for (double v : k) sum += v;
  for (double& v : k) v /= sum;
  return k;
}

inline Image defocus_blur(const Image& x, double radius, double alias_sigma) {
  int size = 0;
  const auto k = disk_kernel(radius, alias_sigma, size);
  return convolve2d(x, k, size);
}

/// One-sided line kernel: Gaussian weights exp(-t^2 / 2 sigma^2) at
/// t = 0..radius along `angle_deg`, splatted bilinearly onto the grid.
inline std::vector<double> motion_kernel(double radius, double sigma, double angle_deg, int& size) {
  const int r = static_cast<int>(std::ceil(radius)) + 1;
  size = 2 * r + 1;
  std::vector<double> k(static_cast<std::size_t>(size) * size, 0.0);
  const double a = angle_deg * std::numbers::pi / 180.0;
  const double dx = std::cos(a), dy = std::sin(a);
  for (int t = 0; t <= static_cast<int>(radius); ++t) {
    const double w = std::exp(-0.5 * t * t / (sigma * sigma));
    const double px = r + t * dx, py = r + t * dy;
    const int x0 = static_cast<int>(std::floor(px)), y0 = static_cast<int>(std::floor(py));
    const double fx = px - x0, fy = py - y0;
    auto add = [&](int xx, int yy, double ww) {
      if (xx >= 0 && yy >= 0 && xx < size && yy < size) k[yy * size + xx] += ww;
    };
    add(x0, y0, w * (1 - fx) * (1 - fy));
    add(x0 + 1, y0, w * fx * (1 - fy));
    add(x0, y0 + 1, w * (1 - fx) * fy);
    add(x0 + 1, y0 + 1, w * fx * fy);
  }
  double sum = 0.0;
  for (double v : k) sum += v;
  for (double& v : k) v /= sum;
  return k;
}

inline Image motion_blur(const Image& x, double radius, double sigma, double angle_deg) {
  int size = 0;
  const auto k = motion_kernel(radius, sigma, angle_deg, size);
  return convolve2d(x, k, size);
}

/// Zooms by `z` about the image center, keeping the size (center crop of
/// 1/z of the extent, bilinear upsample).
inline Image clipped_zoom(const Image& x, double z) {
  const double cw = x.width / z, ch = x.height / z;
  const double x0 = (x.width - cw) / 2, y0 = (x.height - ch) / 2;
  return crop_resize(x, x0, y0, x0 + cw, y0 + ch, x.width, x.height);
}

/// Mean of the image and its zoomed copies at 1, 1+step, ... < max_zoom.
inline Image zoom_blur(const Image& x, double max_zoom, double step) {
  std::vector<double> acc(x.pixels.begin(), x.pixels.end());
  int n = 1;
  for (int i = 0;; ++i) {
    const double z = 1.0 + i * step;
    if (z >= max_zoom - 1e-12) break;
    const Image zoomed = clipped_zoom(x, z);
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += zoomed.pixels[j];
    ++n;
  }
  Image out(x.width, x.height, x.channels);
  for (std::size_t j = 0; j < acc.size(); ++j) out.pixels[j] = static_cast<float>(acc[j] / n);
  return out;
}

/// Blur, then random local pixel swaps within max_delta, repeated
/// `iterations` times, then blur again.
inline Image glass_blur(const Image& src, double sigma, int max_delta, int iterations, CounterRng& rng) {
  Image x = gaussian_blur(src, sigma);
  for (int it = 0; it < iterations; ++it)
    for (int h = x.height - max_delta; h > max_delta; --h)
      for (int w = x.width - max_delta; w > max_delta; --w) {
        const int dx = rng.uniform_int(-max_delta, max_delta - 1);
        const int dy = rng.uniform_int(-max_delta, max_delta - 1);
        const int h2 = h + dy, w2 = w + dx;
        for (int c = 0; c < x.channels; ++c) std::swap(x.at(w, h, c), x.at(w2, h2, c));
      }
  return gaussian_blur(x, sigma);
}

inline Image fog(const Image& x, double strength, double wibble_decay, CounterRng& rng) {
  const double max_val = x.pixels.empty() ? 0.0 : *std::max_element(x.pixels.begin(), x.pixels.end());
  const Field plasma = plasma_fractal(next_pow2(std::max(x.width, x.height)), wibble_decay, rng);
  Image out = x;
  const double scale = max_val / (max_val + strength);
  for (int y = 0; y < x.height; ++y)
    for (int i = 0; i < x.width; ++i)
      for (int c = 0; c < x.channels; ++c)
        out.at(i, y, c) = static_cast<float>((x.at(i, y, c) + strength * plasma(i, y)) * scale);
  return out;
}

inline Image frost(const Image& src, double image_weight, double frost_weight, CounterRng& rng) {
  Image x = to_rgb(src);
  const Image layer = frost_layer(x.width, x.height, rng);
  for (std::size_t i = 0; i < x.size(); ++i)
    x.pixels[i] = static_cast<float>(image_weight * x.pixels[i] + frost_weight * layer.pixels[i]);
  return x;
}

/// {loc, scale, zoom, threshold, blur_radius, blur_sigma, blend}
inline Image snow(const Image& src, const std::vector<double>& c, CounterRng& rng) {
  Image x = to_rgb(src);
  Field layer(x.width, x.height);
  for (double& v : layer.v) v = rng.normal(c[0], c[1]);
  Image flake = clipped_zoom(field_to_image(layer), c[2]);
  for (float& v : flake.pixels)
    if (v < c[3]) v = 0.0f;
  flake = motion_blur(flake, c[4], c[5], rng.uniform(-135.0, -45.0));
  const double blend = c[6];
  for (int y = 0; y < x.height; ++y)
    for (int i = 0; i < x.width; ++i) {
      const float gray = luma(x.at(i, y, 0), x.at(i, y, 1), x.at(i, y, 2));
      const float s = flake.at(i, y, 0) + flake.at(x.width - 1 - i, x.height - 1 - y, 0);
      for (int ch = 0; ch < 3; ++ch) {
        float& v = x.at(i, y, ch);
        const double lifted = std::max<double>(v, gray * 1.5 + 0.5);
        v = static_cast<float>(blend * v + (1 - blend) * lifted + s);
      }
    }
  return x;
}

/// {loc, scale, sigma, threshold, intensity, mud}. Water: pale turquoise
/// highlights along blob rims. Mud: opaque brown blobs.
inline Image spatter(const Image& src, const std::vector<double>& c, CounterRng& rng) {
  Image x = to_rgb(src);
  Field liquid(x.width, x.height);
  for (double& v : liquid.v) v = rng.normal(c[0], c[1]);
  liquid = image_to_field(gaussian_blur(field_to_image(liquid), c[2]));
  for (double& v : liquid.v)
    if (v < c[3]) v = 0.0;
  if (c[5] == 0.0) {
    // rim strength: local gradient of the blob layer, smoothed
    Field rim(x.width, x.height);
    for (int y = 0; y < x.height; ++y)
      for (int i = 0; i < x.width; ++i) {
        const double gx = liquid(clamp_index(i + 1, x.width), y) - liquid(clamp_index(i - 1, x.width), y);
        const double gy = liquid(i, clamp_index(y + 1, x.height)) - liquid(i, clamp_index(y - 1, x.height));
        rim(i, y) = liquid(i, y) > 0 ? liquid(i, y) * (0.5 + std::hypot(gx, gy)) : 0.0;
      }
    rim = image_to_field(gaussian_blur(field_to_image(rim), 1.0));
    const double mx = *std::max_element(rim.v.begin(), rim.v.end());
    const double color[3] = {175 / 255.0, 238 / 255.0, 238 / 255.0};
    for (int y = 0; y < x.height; ++y)
      for (int i = 0; i < x.width; ++i) {
        const double m = mx > 0 ? rim(i, y) / mx * c[4] : 0.0;
        for (int ch = 0; ch < 3; ++ch) x.at(i, y, ch) = static_cast<float>(x.at(i, y, ch) + m * color[ch]);
      }
    return x;
  }
  Field mask(x.width, x.height);
  for (std::size_t i = 0; i < mask.v.size(); ++i) mask.v[i] = liquid.v[i] > c[3] ? 1.0 : 0.0;
  mask = image_to_field(gaussian_blur(field_to_image(mask), c[4]));
  const double color[3] = {63 / 255.0, 42 / 255.0, 20 / 255.0};
  for (int y = 0; y < x.height; ++y)
    for (int i = 0; i < x.width; ++i) {
      double m = mask(i, y);
      if (m < 0.8) m = 0.0;
      for (int ch = 0; ch < 3; ++ch)
        x.at(i, y, ch) = static_cast<float>(x.at(i, y, ch) * (1 - m) + color[ch] * m);
    }
  return x;
}

/// Random affine jitter of three control points by up to `affine` pixels,
/// then a smooth displacement field (uniform noise blurred by `sigma`,
/// scaled by `alpha`), bilinear sampling with reflect borders.
inline Image elastic(const Image& x, double alpha, double sigma, double affine, CounterRng& rng) {
  const double cx = x.width / 2.0, cy = x.height / 2.0;
  const double sq = std::min(x.width, x.height) / 3.0;
  const double src[3][2] = {{cx + sq, cy + sq}, {cx + sq, cy - sq}, {cx - sq, cy - sq}};
  double dst[3][2];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) dst[i][j] = src[i][j] + rng.uniform(-affine, affine);
  // Solve for the inverse map dst -> src (sampling positions).
  auto solve3 = [&](int comp, double out[3]) {
    const double a[3][3] = {{dst[0][0], dst[0][1], 1}, {dst[1][0], dst[1][1], 1}, {dst[2][0], dst[2][1], 1}};
    const double b[3] = {src[0][comp], src[1][comp], src[2][comp]};
    const double det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                       a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                       a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    for (int col = 0; col < 3; ++col) {
      double m[3][3];
      for (int r = 0; r < 3; ++r)
        for (int q = 0; q < 3; ++q) m[r][q] = q == col ? b[r] : a[r][q];
      out[col] = (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                  m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])) /
                 det;
    }
  };
  double ax[3], ay[3];
  solve3(0, ax);
  solve3(1, ay);

  Field dxf(x.width, x.height), dyf(x.width, x.height);
  for (double& v : dxf.v) v = rng.uniform(-1.0, 1.0);
  for (double& v : dyf.v) v = rng.uniform(-1.0, 1.0);
  dxf = image_to_field(gaussian_blur(field_to_image(dxf), sigma));
  dyf = image_to_field(gaussian_blur(field_to_image(dyf), sigma));

  Image out(x.width, x.height, x.channels);
  for (int y = 0; y < x.height; ++y)
    for (int i = 0; i < x.width; ++i) {
      const double px = i + 0.5, py = y + 0.5;
      const double sx = ax[0] * px + ax[1] * py + ax[2] + alpha * dxf(i, y) - 0.5;
      const double sy = ay[0] * px + ay[1] * py + ay[2] + alpha * dyf(i, y) - 0.5;
      const double fx = std::floor(sx), fy = std::floor(sy);
      const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
      const double tx = sx - fx, ty = sy - fy;
      const int xa = reflect_index(x0, x.width), xb = reflect_index(x0 + 1, x.width);
      const int ya = reflect_index(y0, x.height), yb = reflect_index(y0 + 1, x.height);
      for (int c = 0; c < x.channels; ++c) {
        const double top = (1 - tx) * x.at(xa, ya, c) + tx * x.at(xb, ya, c);
        const double bot = (1 - tx) * x.at(xa, yb, c) + tx * x.at(xb, yb, c);
        out.at(i, y, c) = static_cast<float>((1 - ty) * top + ty * bot);
      }
    }
  return out;
}

/// Alpha-blend toward a bright, slightly blue-gray cloud color through a
/// procedural cloud mask.
inline Image cloudy(const Image& src, double coverage, double opacity, CounterRng& rng) {
  Image x = to_rgb(src);
  const Field mask = cloud_mask(x.width, x.height, coverage, rng);
  const Field shade = value_noise(x.width, x.height, 8.0, 3, 0.5, rng);
  for (int y = 0; y < x.height; ++y)
    for (int i = 0; i < x.width; ++i) {
      const double a = opacity * mask(i, y);
      const double base = 0.85 + 0.15 * shade(i, y);
      const double col[3] = {base * 0.97, base * 0.98, base};
      for (int c = 0; c < 3; ++c) x.at(i, y, c) = static_cast<float>((1 - a) * x.at(i, y, c) + a * col[c]);
    }
  return x;
}

}  // namespace corruption

/// Applies one corruption. Deterministic in (image, spec); grayscale input
/// is promoted to RGB; output is clamped to [0, 1].
inline Image corrupt_image(const Image& input, const CorruptionSpec& spec,
                           const SeverityTable& table = default_severity_table()) {
  if (input.empty()) throw DataError("corrupt_image: empty image");
  if (static_cast<std::size_t>(spec.kind) >= kNumCorruptionKinds) throw ConfigError("kind", "unknown corruption kind");
  const Image x = to_rgb(input);
  const auto& p = table.params(spec.kind, spec.severity);
  CounterRng rng(derive_key(spec.seed, static_cast<std::uint64_t>(spec.kind)));
  using K = CorruptionKind;
  namespace co = corruption;
  Image out;
  switch (spec.kind) {
    case K::gaussian_noise: out = co::add_gaussian_noise(x, p[0], rng); break;
    case K::shot_noise: out = co::shot_noise(x, p[0], rng); break;
    case K::impulse_noise: out = co::impulse_noise(x, p[0], rng); break;
    case K::speckle_noise: out = co::speckle_noise(x, p[0], rng); break;
    case K::defocus_blur: out = co::defocus_blur(x, p[0], p[1]); break;
    case K::glass_blur: out = co::glass_blur(x, p[0], static_cast<int>(p[1]), static_cast<int>(p[2]), rng); break;
    case K::motion_blur: out = co::motion_blur(x, p[0], p[1], rng.uniform(-45.0, 45.0)); break;
    case K::zoom_blur: out = co::zoom_blur(x, p[0], p[1]); break;
    case K::gaussian_blur: out = gaussian_blur(x, p[0]); break;
    case K::snow: out = co::snow(x, p, rng); break;
    case K::frost: out = co::frost(x, p[0], p[1], rng); break;
    case K::fog: out = co::fog(x, p[0], p[1], rng); break;
    case K::brightness: out = co::brightness(x, p[0]); break;
    case K::spatter: out = co::spatter(x, p, rng); break;
    case K::contrast: out = co::contrast(x, p[0]); break;
    case K::elastic: out = co::elastic(x, p[0], p[1], p[2], rng); break;
    case K::pixelate: out = co::pixelate(x, p[0]); break;
    case K::jpeg: out = co::jpeg(x, static_cast<int>(p[0])); break;
    case K::saturate: out = co::saturate(x, p[0], p[1]); break;
    case K::cloudy: out = co::cloudy(x, p[0], p[1], rng); break;
    default: throw ConfigError("kind", "unknown corruption kind");
  }
  clamp01(out);
  return out;
}

// ---- dataset generation -----------------------------------------------------

struct ManifestEntry {
  std::string path;  // relative to the destination root, '/' separated
  std::string kind;
  int severity = 0;
  std::uint64_t seed = 0;
  std::string sha256;  // "-" when failed
  std::string status;  // "ok" or "failed: <reason>"
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct Manifest {
  std::vector<ManifestEntry> entries;  // sorted by path

  std::size_t failed_count() const {
    return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(),
                                                  [](const ManifestEntry& e) { return e.status != "ok"; }));
  }
};

/// Text form: a "#" header line, then one tab-separated line per entry:
/// path, kind, severity, seed, sha256, status.
inline std::string format_manifest(const Manifest& m) {
  std::ostringstream os;
  os << "# sfod-manifest v1\tpath\tkind\tseverity\tseed\tsha256\tstatus\n";
  for (const auto& e : m.entries)
    os << e.path << '\t' << e.kind << '\t' << e.severity << '\t' << e.seed << '\t' << e.sha256 << '\t' << e.status
       << '\n';
  return os.str();
}

inline Manifest parse_manifest(const std::string& text) {
  Manifest m;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      auto tab = line.find('\t', start);
      f.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (f.size() != 6) throw IoError("manifest: malformed line '" + line + "'");
    m.entries.push_back({f[0], f[1], std::stoi(f[2]), std::stoull(f[3]), f[4], f[5]});
  }
  return m;
}

inline std::string generic_rel(const std::filesystem::path& p) { return p.generic_string(); }

/// Per-file randomness key: (seed, relative image path, kind).
inline std::uint64_t file_seed(std::uint64_t seed, const std::string& rel_path, CorruptionKind kind) {
  return derive_key(seed, hash_bytes(rel_path), static_cast<std::uint64_t>(kind));
}

/// Reads images from `src/images` (or `src` itself when that subdirectory
/// is missing) and writes `dst/<kind>/images/<stem>.png`. Annotation files
/// in `src/annotations` are copied byte for byte to `dst/<kind>/annotations`.
/// Unreadable images are recorded as failed and skipped. The manifest is
/// also written to `dst/manifest.tsv`.
inline Manifest generate_dataset(const std::filesystem::path& src, const std::filesystem::path& dst,
                                 const std::vector<CorruptionKind>& kinds, int severity, std::uint64_t seed,
                                 unsigned workers = 1, const SeverityTable& table = default_severity_table()) {
  namespace fs = std::filesystem;
  if (severity < 1 || severity > 5) throw ConfigError("severity", "severity must lie in [1, 5]");
  if (!fs::is_directory(src)) throw IoError("source directory not found: " + src.string());
  const fs::path img_dir = fs::is_directory(src / "images") ? src / "images" : src;
  const fs::path ann_dir = src / "annotations";

  std::vector<fs::path> images, annotations;
  for (const auto& e : fs::directory_iterator(img_dir))
    if (e.is_regular_file() && is_image_path(e.path())) images.push_back(e.path());
  if (fs::is_directory(ann_dir))
    for (const auto& e : fs::directory_iterator(ann_dir))
      if (e.is_regular_file()) annotations.push_back(e.path());
  std::sort(images.begin(), images.end());
  std::sort(annotations.begin(), annotations.end());

  struct Job {
    CorruptionKind kind;
    fs::path image;
  };
  std::vector<Job> jobs;
  for (auto k : kinds)
    for (const auto& im : images) jobs.push_back({k, im});

  fs::create_directories(dst);
  for (auto k : kinds) {
    fs::create_directories(dst / std::string(to_string(k)) / "images");
    if (!annotations.empty()) fs::create_directories(dst / std::string(to_string(k)) / "annotations");
  }

  std::vector<ManifestEntry> entries(jobs.size());
  parallel_for(jobs.size(), workers, [&](std::size_t i) {
    const auto& job = jobs[i];
    const std::string kind_name(to_string(job.kind));
    const std::string src_rel = job.image.filename().string();
    const fs::path out_rel = fs::path(kind_name) / "images" / (job.image.stem().string() + ".png");
    ManifestEntry& e = entries[i];
    e.path = generic_rel(out_rel);
    e.kind = kind_name;
    e.severity = severity;
    e.seed = file_seed(seed, src_rel, job.kind);
    try {
      const Image img = read_image(job.image);
      const Image out = corrupt_image(img, {job.kind, severity, e.seed}, table);
      const auto bytes = encode_png(out);
      write_file_bytes(dst / out_rel, bytes.data(), bytes.size());
      e.sha256 = sha256_hex(bytes.data(), bytes.size());
      e.status = "ok";
    } catch (const std::exception& ex) {
      e.sha256 = "-";
      std::string msg = ex.what();
      std::replace(msg.begin(), msg.end(), '\t', ' ');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      e.status = "failed: " + msg;
    }
  });

  for (auto k : kinds)
    for (const auto& a : annotations) {
      const std::string kind_name(to_string(k));
      const fs::path out_rel = fs::path(kind_name) / "annotations" / a.filename();
      const auto bytes = read_file_bytes(a);
      write_file_bytes(dst / out_rel, bytes.data(), bytes.size());
      entries.push_back({generic_rel(out_rel), kind_name, severity, file_seed(seed, a.filename().string(), k),
                         sha256_hex(bytes.data(), bytes.size()), "ok"});
    }

  std::sort(entries.begin(), entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
  Manifest m{std::move(entries)};
  const std::string text = format_manifest(m);
  write_file_bytes(dst / "manifest.tsv", text.data(), text.size());
  return m;
}

}  // namespace sfod
