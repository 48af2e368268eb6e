// Copyright 2026 The sfod Authors
// SPDX-License-Identifier: Apache-2.0

// Synthetic aerial-style scenes: colored shapes on a textured background,
// with tight oriented ground truth. Stand-in for a labeled remote-sensing
// dataset at desk scale.

#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "sfod/core/error.hpp"
#include "sfod/core/image.hpp"
#include "sfod/core/image_io.hpp"
#include "sfod/core/parallel.hpp"
#include "sfod/core/rng.hpp"
#include "sfod/corrupt.hpp"
#include "sfod/corrupt/textures.hpp"
#include "sfod/eval.hpp"
#include "sfod/geometry.hpp"

namespace sfod {

enum class Shape { rectangle, ellipse, triangle, cross };

struct ClassStyle {
  double hue = 0.0;  // degrees
  Shape shape = Shape::rectangle;
  std::string name;
};

inline constexpr std::size_t kMinSceneClasses = 2;
inline constexpr std::size_t kMaxSceneClasses = 16;

/// Class k of K: one of eight hues and one of four shapes. For K <= 8 hues
/// are spread evenly over the eight; above that each hue carries two shapes.
inline ClassStyle class_style(std::size_t k, std::size_t num_classes) {
  static constexpr std::array<const char*, 8> kHueNames{"red",  "orange", "lime",   "green",
                                                        "cyan", "blue",   "violet", "magenta"};
  static constexpr std::array<const char*, 4> kShapeNames{"rectangle", "ellipse", "triangle", "cross"};
  if (num_classes < kMinSceneClasses || num_classes > kMaxSceneClasses)
    throw ConfigError("num_classes", "num_classes must lie in [2, 16]");
  if (k >= num_classes) throw DataError("class index out of range");
  std::size_t hue, shape;
  if (num_classes <= 8) {
    hue = k * 8 / num_classes;
    shape = k % 4;
  } else {
    hue = k % 8;
    shape = (k + k / 8) % 4;
  }
  return {45.0 * static_cast<double>(hue), static_cast<Shape>(shape),
          std::string(kHueNames[hue]) + " " + kShapeNames[shape]};
}

inline std::vector<std::string> scene_class_names(std::size_t num_classes) {
  std::vector<std::string> names;
  for (std::size_t k = 0; k < num_classes; ++k) names.push_back(class_style(k, num_classes).name);
  return names;
}

/// One labeled image. Loaded datasets carry seed 0.
struct SyntheticScene {
  std::string id;
  Image image;
  std::vector<GroundTruthBox> gt;
  std::uint64_t seed = 0;
};

using Dataset = std::vector<SyntheticScene>;

/// Point test in box-local coordinates (u along w, v along h).
inline bool shape_contains(Shape s, double u, double v, double w, double h) noexcept {
  if (std::abs(u) > w / 2 || std::abs(v) > h / 2) return false;
  switch (s) {
    case Shape::rectangle:
      return true;
    case Shape::ellipse:
      return (2 * u / w) * (2 * u / w) + (2 * v / h) * (2 * v / h) <= 1.0;
    case Shape::triangle:  // apex at v = -h/2, base along v = +h/2
      return std::abs(u) <= (w / 2) * (v + h / 2) / h;
    case Shape::cross:
      return std::abs(u) <= w / 6 || std::abs(v) <= h / 6;
  }
  return false;
}

namespace detail {

inline void paint_shape(Image& img, const OrientedBox& b, Shape shape, const float rgb[3], CounterRng& rng) {
  constexpr int kSub = 4;
  const HorizontalBox hb = to_horizontal(b);
  const double c = std::cos(b.theta), s = std::sin(b.theta);
  const int x0 = std::max(0, static_cast<int>(std::floor(hb.x0()))), x1 = std::min(img.width - 1, static_cast<int>(hb.x1()));
  const int y0 = std::max(0, static_cast<int>(std::floor(hb.y0()))), y1 = std::min(img.height - 1, static_cast<int>(hb.y1()));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      int hits = 0;
      for (int sy = 0; sy < kSub; ++sy)
        for (int sx = 0; sx < kSub; ++sx) {
          const double px = x + (sx + 0.5) / kSub - b.cx, py = y + (sy + 0.5) / kSub - b.cy;
          hits += shape_contains(shape, c * px + s * py, -s * px + c * py, b.w, b.h);
        }
      if (hits == 0) continue;
      const float cov = static_cast<float>(hits) / (kSub * kSub);
      const float shade = static_cast<float>(0.04 * rng.normal());
      for (int ch = 0; ch < 3; ++ch) {
        float& p = img.at(x, y, ch);
        p = (1 - cov) * p + cov * std::clamp(rgb[ch] + shade, 0.0f, 1.0f);
      }
    }
}

inline Image quantized(const Image& img) {
  const auto bytes = to_bytes8(img);
  return from_bytes8(bytes.data(), img.width, img.height, img.channels);
}

}  // namespace detail

/// Renders one scene: earth-toned value-noise background plus 1-8
/// non-overlapping shapes, each 10-22% of the image side, orientation
/// uniform in [-pi/2, pi/2). Pixels are quantized to 8 bits so the scene
/// survives a PNG round trip unchanged.
inline SyntheticScene render_scene(std::string id, std::size_t num_classes, std::uint64_t key, int size = 128) {
  if (size < 32) throw ConfigError("image_size", "image_size must be >= 32");
  CounterRng rng(key);
  SyntheticScene sc;
  sc.id = std::move(id);
  sc.seed = key;
  sc.image = Image(size, size, 3);
  CounterRng bg_rng = rng.fork(0xB6);
  const Field t = value_noise(size, size, size / 4.0, 4, 0.5, bg_rng);
  static constexpr float kDark[3]{0.36f, 0.40f, 0.30f}, kLight[3]{0.58f, 0.54f, 0.45f};
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const float a = static_cast<float>(t(x, y));
      const float grain = static_cast<float>(0.03 * bg_rng.normal());
      for (int c = 0; c < 3; ++c) sc.image.at(x, y, c) = std::clamp((1 - a) * kDark[c] + a * kLight[c] + grain, 0.0f, 1.0f);
    }

  const int want = rng.uniform_int(1, 8);
  std::vector<OrientedBox> placed;
  for (int attempt = 0; attempt < 200 && static_cast<int>(placed.size()) < want; ++attempt) {
    OrientedBox b;
    b.w = rng.uniform(0.10, 0.22) * size;
    b.h = rng.uniform(0.10, 0.22) * size;
    b.theta = rng.uniform(-std::numbers::pi / 2, std::numbers::pi / 2);
    const HorizontalBox hb = to_horizontal({0, 0, b.w, b.h, b.theta});
    const double mx = hb.w / 2 + 2, my = hb.h / 2 + 2;
    b.cx = rng.uniform(mx, size - mx);
    b.cy = rng.uniform(my, size - my);
    const OrientedBox grown{b.cx, b.cy, b.w * 1.2, b.h * 1.2, b.theta};
    bool clash = false;
    for (const auto& p : placed)
      if (rotated_iou(grown, {p.cx, p.cy, p.w * 1.2, p.h * 1.2, p.theta}) > 0.0) clash = true;
    if (clash) continue;
    const std::size_t k = rng.below(num_classes);
    const ClassStyle style = class_style(k, num_classes);
    float rgb[3];
    hsv_to_rgb({static_cast<float>(style.hue / 360.0), static_cast<float>(rng.uniform(0.65, 0.9)),
                static_cast<float>(rng.uniform(0.7, 0.95))},
               rgb[0], rgb[1], rgb[2]);
    detail::paint_shape(sc.image, b, style.shape, rgb, rng);
    placed.push_back(b);
    sc.gt.push_back({b, k, false});
  }
  sc.image = detail::quantized(sc.image);
  return sc;
}

/// n scenes with ids "<prefix>_0000"...; scene i is keyed by (draw, i) so
/// any scene can be regenerated alone.
inline Dataset generate_scenes(std::size_t n, std::size_t num_classes, CounterRng& rng, int size = 128,
                               const std::string& prefix = "scene", unsigned workers = 1) {
  if (n < 1) throw ConfigError("scenes", "need at least one scene");
  class_style(0, num_classes);  // validates K
  const std::uint64_t base = rng.next_u64();
  Dataset out(n);
  parallel_for(n, workers, [&](std::size_t i) {
    char id[32];
    std::snprintf(id, sizeof id, "%s_%04zu", prefix.c_str(), i);
    out[i] = render_scene(id, num_classes, derive_key(base, i), size);
  });
  return out;
}

// ---- proposals (region-proposal stand-in) ---------------------------------------

struct ProposalConfig {
  std::size_t per_object = 2;  // jittered copies of each object box
  std::size_t distractors = 6; // background boxes per image
  double center_sigma = 1.5;   // pixels
  double size_sigma = 0.05;    // relative
  double angle_sigma = 0.05;   // radians
};

/// Candidate boxes for one image: jittered object boxes followed by
/// background boxes that overlap no object by more than 0.3 IoU. The
/// stream is keyed by (seed, image id) so every method sees the same set.
inline std::vector<OrientedBox> make_proposals(const SyntheticScene& sc, const ProposalConfig& pc, std::uint64_t seed) {
  CounterRng rng(derive_key(seed, 0x9409, hash_bytes(sc.id)));
  std::vector<OrientedBox> out;
  for (const auto& g : sc.gt)
    for (std::size_t j = 0; j < pc.per_object; ++j) {
      OrientedBox b = g.box;
      b.cx += pc.center_sigma * rng.normal();
      b.cy += pc.center_sigma * rng.normal();
      b.w *= std::max(0.5, 1.0 + pc.size_sigma * rng.normal());
      b.h *= std::max(0.5, 1.0 + pc.size_sigma * rng.normal());
      b.theta = normalize_angle(b.theta + pc.angle_sigma * rng.normal());
      out.push_back(b);
    }
  const double size = std::min(sc.image.width, sc.image.height);
  for (std::size_t j = 0; j < pc.distractors; ++j)
    for (int attempt = 0; attempt < 50; ++attempt) {
      OrientedBox b{rng.uniform(0, sc.image.width), rng.uniform(0, sc.image.height), rng.uniform(0.1, 0.22) * size,
                    rng.uniform(0.1, 0.22) * size, rng.uniform(-std::numbers::pi / 2, std::numbers::pi / 2)};
      bool overlaps = false;
      for (const auto& g : sc.gt) overlaps = overlaps || rotated_iou(b, g.box) > 0.3;
      if (!overlaps) {
        out.push_back(b);
        break;
      }
    }
  return out;
}

/// Ground-truth class of each proposal: the best-overlapping object at
/// IoU >= 0.5, nullopt otherwise.
inline std::vector<std::optional<std::size_t>> proposal_truth(const std::vector<OrientedBox>& proposals,
                                                              const std::vector<GroundTruthBox>& gt,
                                                              double iou_thr = kVocIou) {
  std::vector<std::optional<std::size_t>> out(proposals.size());
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    double best = iou_thr;
    for (const auto& g : gt) {
      const double iou = rotated_iou(proposals[i], g.box);
      if (iou >= best) {
        best = iou;
        out[i] = g.class_id;
      }
    }
  }
  return out;
}

// ---- datasets on disk -------------------------------------------------------------
//
// DIR/images/<id>.png and DIR/annotations/<id>.txt (ground-truth format).

inline void save_dataset(const std::filesystem::path& dir, const Dataset& ds, unsigned workers = 1) {
  std::filesystem::create_directories(dir / "images");
  std::filesystem::create_directories(dir / "annotations");
  parallel_for(ds.size(), workers, [&](std::size_t i) {
    write_image(dir / "images" / (ds[i].id + ".png"), ds[i].image);
    write_text_file(dir / "annotations" / (ds[i].id + ".txt"), format_ground_truth(ds[i].gt));
  });
}

/// Images sorted by file name; a missing annotation file means no objects.
inline Dataset load_dataset(const std::filesystem::path& dir, unsigned workers = 1) {
  namespace fs = std::filesystem;
  const fs::path img_dir = dir / "images";
  if (!fs::is_directory(img_dir)) throw IoError("dataset has no images directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(img_dir))
    if (e.is_regular_file() && is_image_path(e.path())) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  Dataset ds(files.size());
  parallel_for(files.size(), workers, [&](std::size_t i) {
    ds[i].id = files[i].stem().string();
    ds[i].image = to_rgb(read_image(files[i]));
    const fs::path ann = dir / "annotations" / (ds[i].id + ".txt");
    if (fs::exists(ann)) ds[i].gt = parse_ground_truth(read_text_file(ann), ann.string());
  });
  return ds;
}

/// Applies one corruption to every image in memory with the same per-file
/// seeds generate_dataset uses for "<id>.png", so both paths agree bit for bit.
inline Dataset corrupt_dataset(const Dataset& ds, CorruptionKind kind, int severity, std::uint64_t seed,
                               unsigned workers = 1, const SeverityTable& table = default_severity_table()) {
  Dataset out(ds.size());
  parallel_for(ds.size(), workers, [&](std::size_t i) {
    out[i] = ds[i];
    const Image c = corrupt_image(ds[i].image, {kind, severity, file_seed(seed, ds[i].id + ".png", kind)}, table);
    out[i].image = detail::quantized(c);
  });
  return out;
}

}  // namespace sfod
